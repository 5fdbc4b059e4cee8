#pragma once

#include <cstdint>
#include <string>

#include "ctxshape/corpus.hpp"

namespace ctxshape {

enum class DistractorStyle {
  // Red herrings repeat the question's words but carry no answer.
  lexical,
  // Distractors share no word with the question but talk about the answer
  // value; only the insight names the subject.
  topical,
};

std::string_view to_string(DistractorStyle s);
DistractorStyle parse_distractor_style(std::string_view s);

struct SyntheticSpec {
  std::size_t questions = 20;
  std::size_t insight = 1;
  std::size_t duplicate = 3;
  std::size_t redherring = 12;
  std::size_t counterfactual = 4;
  DistractorStyle distractor_style = DistractorStyle::lexical;
  // Filler words appended to each insight, making it session-sized.
  std::size_t insight_padding = 0;
  std::string name = "synthetic";

  std::size_t candidates_per_question() const { return insight + duplicate + redherring + counterfactual; }
  void validate() const;
};

// Every question has a single-token numeric answer. Gold ids are the
// insights; labels record each candidate's class. Same (seed, spec), same
// corpus.
Corpus generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec);

}  // namespace ctxshape
