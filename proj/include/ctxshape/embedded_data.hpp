#pragma once

#include <string_view>

namespace ctxshape::embedded {

// Contents of data/toy_corpus.txt, one training line per text line.
std::string_view toy_corpus();

// Contents of data/irrelevant_tokens.txt ('#' starts a comment line).
std::string_view irrelevant_tokens();

}  // namespace ctxshape::embedded
