#include <fstream>
#include <sstream>

#include "knowrl/corpus.hpp"
#include "knowrl/text.hpp"

namespace knowrl {

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  // U+00A0 counts as space; the prompt examples indent with it.
  void skip_space() {
    while (pos_ < s_.size()) {
      if (text::is_space(s_[pos_])) {
        ++pos_;
      } else if (s_.substr(pos_, 2) == "\xC2\xA0") {
        pos_ += 2;
      } else {
        break;
      }
    }
  }
  void skip_inline_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool consume(std::string_view lit) {
    if (s_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }
  void expect(std::string_view lit, const char* what) {
    if (!consume(lit)) fail(std::string("expected ") + what);
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("extractor response: " + what + "; byte offset", pos_);
  }
  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }
  std::size_t pos() const { return pos_; }
  void set_pos(std::size_t p) { pos_ = p; }
  std::string_view rest() const { return s_.substr(pos_); }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

// "..." where the closing quote is the last '"' on the current line.
std::string quoted_to_line_end(Cursor& c) {
  c.expect("\"", "opening quote");
  const auto rest = c.rest();
  const auto eol = std::min(rest.find('\n'), rest.size());
  const auto line = rest.substr(0, eol);
  const auto close = line.rfind('"');
  if (close == std::string_view::npos) c.fail("unterminated quoted query");
  std::string value(line.substr(0, close));
  c.set_pos(c.pos() + close + 1);
  return value;
}

std::vector<std::string> entity_list(Cursor& c) {
  c.expect("[", "'[' opening the entity list");
  std::vector<std::string> out;
  c.skip_space();
  if (c.peek() == ']') c.fail("empty entity list");
  while (true) {
    c.skip_space();
    c.expect("\"", "quoted entity");
    const auto rest = c.rest();
    const auto close = rest.find('"');
    if (close == std::string_view::npos) c.fail("unterminated entity");
    const auto value = text::trim(rest.substr(0, close));
    if (value.empty()) c.fail("empty entity");
    out.emplace_back(value);
    if (out.size() > kMaxEntities) c.fail("more than 2 entities");
    c.set_pos(c.pos() + close + 1);
    c.skip_space();
    if (c.consume(",")) continue;
    if (c.consume("]")) break;
    c.fail("expected ',' or ']' in entity list");
  }
  return out;
}

}  // namespace

ExtractorVerdict parse_extractor_response(std::string_view response) {
  Cursor c(response);
  ExtractorVerdict v;
  c.skip_space();
  if (c.consume("Output:")) c.skip_space();
  c.expect("Normalized Query:", "'Normalized Query:' line");
  c.skip_inline_space();
  v.normalized_query = quoted_to_line_end(c);
  c.skip_space();
  if (c.consume("Entities:")) {
    c.skip_inline_space();
    v.accepted = true;
    v.entities = entity_list(c);
  } else if (c.consume("REJECT")) {
    c.skip_inline_space();
    c.expect("(", "'(' after REJECT");
    const auto rest = c.rest();
    const auto close = rest.rfind(')');
    if (close == std::string_view::npos) c.fail("unterminated REJECT reason");
    v.reason = std::string(text::trim(rest.substr(0, close)));
    c.set_pos(c.pos() + close + 1);
  } else {
    c.fail("expected 'Entities:' or 'REJECT'");
  }
  c.skip_space();
  if (!c.done()) c.fail("trailing content");
  return v;
}

std::string render_extractor_verdict(const ExtractorVerdict& v) {
  std::string out = "Normalized Query: \"" + v.normalized_query + "\"\n";
  if (v.accepted) {
    out += "Entities: [";
    for (std::size_t i = 0; i < v.entities.size(); ++i) {
      if (i > 0) out += ", ";
      out += "\"" + v.entities[i] + "\"";
    }
    out += "]";
  } else {
    out += "REJECT (" + v.reason + ")";
  }
  return out;
}

std::string default_extractor_prompt_path() {
#ifdef KNOWRL_ASSET_DIR
  return std::string(KNOWRL_ASSET_DIR) + "/extractor_prompt.txt";
#else
  return "assets/extractor_prompt.txt";
#endif
}

std::string load_extractor_prompt(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open extractor prompt " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string render_extractor_prompt(std::string_view prompt_template, std::string_view query) {
  std::string out(prompt_template);
  const std::string placeholder = "{query}";
  const auto at = out.find(placeholder);
  if (at == std::string::npos) throw Error("extractor prompt lacks {query}");
  out.replace(at, placeholder.size(), query);
  return out;
}

}  // namespace knowrl
