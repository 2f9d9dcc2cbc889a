#include "fcm/porter_stemmer.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace fcm {
namespace {

class Stemmer {
 public:
  explicit Stemmer(std::string word) : b_(std::move(word)) {}

  std::string run() {
    if (b_.size() <= 2) return b_;
    step1ab();
    step1c();
    step2();
    step3();
    step4();
    step5();
    return b_;
  }

 private:
  // Consonant test on b_[i], with 'y' a consonant only at the start or after a vowel.
  bool cons(std::size_t i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u': return false;
      case 'y': return i == 0 ? true : !cons(i - 1);
      default: return true;
    }
  }

  // Number of VC sequences in b_[0, len).
  int measure(std::size_t len) const {
    int n = 0;
    std::size_t i = 0;
    while (i < len && cons(i)) ++i;
    while (i < len) {
      while (i < len && !cons(i)) ++i;
      if (i >= len) break;
      while (i < len && cons(i)) ++i;
      ++n;
    }
    return n;
  }

  bool has_vowel(std::size_t len) const {
    for (std::size_t i = 0; i < len; ++i) {
      if (!cons(i)) return true;
    }
    return false;
  }

  bool double_cons(std::size_t len) const {
    return len >= 2 && b_[len - 1] == b_[len - 2] && cons(len - 1);
  }

  // cvc at the end of b_[0, len), last c not w, x or y.
  bool cvc(std::size_t len) const {
    if (len < 3 || !cons(len - 1) || cons(len - 2) || !cons(len - 3)) return false;
    const char c = b_[len - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view suffix) const {
    return b_.size() >= suffix.size() &&
           std::string_view(b_).substr(b_.size() - suffix.size()) == suffix;
  }

  std::size_t stem_len(std::string_view suffix) const { return b_.size() - suffix.size(); }

  void replace_suffix(std::string_view suffix, std::string_view with) {
    b_.resize(stem_len(suffix));
    b_.append(with);
  }

  // Replaces the first matching suffix when the remaining stem has m > 0.
  template <std::size_t N>
  void replace_first(const std::array<std::pair<std::string_view, std::string_view>, N>& rules,
                     int min_measure) {
    for (const auto& [suffix, with] : rules) {
      if (ends(suffix)) {
        if (measure(stem_len(suffix)) > min_measure) replace_suffix(suffix, with);
        return;
      }
    }
  }

  void step1ab() {
    if (ends("sses")) {
      replace_suffix("sses", "ss");
    } else if (ends("ies")) {
      replace_suffix("ies", "i");
    } else if (!ends("ss") && ends("s")) {
      b_.pop_back();
    }

    bool trailing = false;
    if (ends("eed")) {
      if (measure(stem_len("eed")) > 0) b_.pop_back();
    } else if (ends("ed") && has_vowel(stem_len("ed"))) {
      b_.resize(stem_len("ed"));
      trailing = true;
    } else if (ends("ing") && has_vowel(stem_len("ing"))) {
      b_.resize(stem_len("ing"));
      trailing = true;
    }
    if (!trailing) return;

    if (ends("at") || ends("bl") || ends("iz")) {
      b_.push_back('e');
    } else if (double_cons(b_.size())) {
      const char c = b_.back();
      if (c != 'l' && c != 's' && c != 'z') b_.pop_back();
    } else if (measure(b_.size()) == 1 && cvc(b_.size())) {
      b_.push_back('e');
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(b_.size() - 1)) b_.back() = 'i';
  }

  void step2() {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 20> rules{{
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},  {"anci", "ance"},
        {"izer", "ize"},    {"bli", "ble"},     {"alli", "al"},    {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"},
    }};
    // "logi" -> "log" is part of the reference implementation's step 2.
    if (ends("logi")) {
      if (measure(stem_len("logi")) > 0) replace_suffix("logi", "log");
      return;
    }
    // Longest-match order matters for overlapping suffixes (e.g. -ational/-tional).
    for (const auto& [suffix, with] : rules) {
      if (ends(suffix)) {
        if (measure(stem_len(suffix)) > 0) replace_suffix(suffix, with);
        return;
      }
    }
  }

  void step3() {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 7> rules{{
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    }};
    replace_first(rules, 0);
  }

  void step4() {
    static constexpr std::array<std::string_view, 19> suffixes{
        "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement", "ment",
        "ent", "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize"};
    // Prefer the longest suffix that matches (ement before ment before ent).
    std::string_view best;
    for (auto s : suffixes) {
      if (ends(s) && s.size() > best.size()) best = s;
    }
    if (best.empty()) return;
    const std::size_t len = stem_len(best);
    if (best == "ion") {
      if (len == 0 || (b_[len - 1] != 's' && b_[len - 1] != 't')) return;
    }
    if (measure(len) > 1) b_.resize(len);
  }

  void step5() {
    if (ends("e")) {
      const std::size_t len = b_.size() - 1;
      const int m = measure(len);
      if (m > 1 || (m == 1 && !cvc(len))) b_.pop_back();
    }
    if (ends("ll") && measure(b_.size()) > 1) b_.pop_back();
  }

  std::string b_;
};

}  // namespace

std::string porter_stem(std::string_view word) {
  const bool letters = std::all_of(word.begin(), word.end(),
                                   [](char c) { return c >= 'a' && c <= 'z'; });
  if (!letters) return std::string(word);
  return Stemmer(std::string(word)).run();
}

}  // namespace fcm
