#ifndef KNOWRL_QA_ITEM_HPP_
#define KNOWRL_QA_ITEM_HPP_

#include <set>
#include <string>
#include <vector>

namespace knowrl {

// One curated question/answer record.
struct QAItem {
  std::string id;
  std::string question;
  std::string normalized_question;
  std::string answer;
  // Further gold answers when the source lists several; non-empty means the
  // item fails the single-answer filter.
  std::vector<std::string> extra_answers;
  std::vector<std::string> entities;  // at most 2 after refinement
  std::vector<std::string> knowledge_refs;
  double entropy = 0.0;
  std::set<std::string> stage_tags;
  std::string source;
  // Reference long-form answer (distilled chain of thought); drives the
  // default length filter.
  std::string long_answer;
};

}  // namespace knowrl

#endif  // KNOWRL_QA_ITEM_HPP_
