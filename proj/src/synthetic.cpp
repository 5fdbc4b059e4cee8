#include "ctxshape/synthetic.hpp"

#include <array>
#include <set>

#include "ctxshape/error.hpp"
#include "ctxshape/text.hpp"

namespace ctxshape {

namespace {

constexpr std::array kEntities = {"lighthouse", "tower", "ship",  "bridge",  "mill",
                                  "observatory", "tram", "glacier", "orchard", "reactor"};
constexpr std::array kAttributes = {"height", "capacity", "serial", "depth", "mass",
                                    "rating", "length", "output", "tally",  "index"};
constexpr std::array kSyllables = {"zor", "vak", "quil", "bren", "tash", "mox", "pell", "drim",
                                   "yul", "kesh", "fra", "lon", "gri", "vesk", "ulm",  "tor"};
// None of these appear in any question template.
constexpr std::array kFiller = {"harbor", "lantern", "morning", "crew",   "ledger",  "signal", "route",
                                "chart",  "engine",  "cargo",   "window", "station", "copper", "ridge",
                                "canvas", "winter",  "market",  "valley", "beacon",  "ferry"};
constexpr std::array kOnes = {"zero", "one", "two",   "three", "four",
                              "five", "six", "seven", "eight", "nine"};
constexpr std::array kTens = {"", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"};
constexpr std::array kTeens = {"ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                               "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};

std::string number_words(int v) {
  if (v < 10) return kOnes[v];
  if (v < 20) return kTeens[v - 10];
  std::string out = kTens[v / 10];
  if (v % 10) out += std::string(" ") + kOnes[v % 10];
  return out;
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string padded_id(std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

struct Subject {
  std::string name;  // rare token, unique per question
  std::string entity;
  std::string attribute;
  int value = 0;
};

std::string fresh_name(text::Rng& rng, std::set<std::string>& used) {
  for (;;) {
    std::string n;
    for (int i = 0; i < 3; ++i) n += kSyllables[rng.below(kSyllables.size())];
    if (used.insert(n).second) return capitalized(n);
  }
}

int other_value(text::Rng& rng, int value) {
  for (;;) {
    int v = 10 + static_cast<int>(rng.below(90));
    if (v != value) return v;
  }
}

std::string filler(text::Rng& rng, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kFiller[rng.below(kFiller.size())];
  }
  return out;
}

std::string insight_text(const Subject& s, text::Rng& rng, std::size_t padding) {
  std::string t = s.name + " came in at " + std::to_string(s.value) + ".";
  if (padding) t += " " + capitalized(filler(rng, padding)) + ".";
  return t;
}

std::string duplicate_text(const Subject& s, text::Rng& rng) {
  static constexpr std::array kForms = {"{n} came in at {w}.", "For {n} it was {w}.",
                                        "{n} again: {w}, as noted before."};
  std::string t = kForms[rng.below(kForms.size())];
  t.replace(t.find("{n}"), 3, s.name);
  t.replace(t.find("{w}"), 3, number_words(s.value));
  return t;
}

std::string redherring_text(const Subject& s, text::Rng& rng) {
  static constexpr std::array kForms = {
      "What is the {a} of the {e} {n}? Everyone asks about the {a} of the {e} {n}.",
      "The {e} {n} is famous and the {a} of the {e} {n} is often discussed.",
      "Is the {a} of the {e} {n} what visitors ask? The {e} {n} and its {a} draw crowds.",
      "Guides mention the {e} {n} and what the {a} of the {e} {n} is like in winter.",
  };
  std::string t = kForms[rng.below(kForms.size())];
  for (auto [key, val] : {std::pair<std::string, const std::string*>{"{a}", &s.attribute},
                          {"{e}", &s.entity},
                          {"{n}", &s.name}}) {
    for (auto pos = t.find(key); pos != std::string::npos; pos = t.find(key, pos + val->size()))
      t.replace(pos, key.size(), *val);
  }
  return t;
}

std::string counterfactual_text(const Subject& s, int wrong) {
  const std::string w = std::to_string(wrong);
  std::string t = "The " + s.attribute + " of the " + s.entity + " " + s.name + " is " + w;
  for (int i = 0; i < 6; ++i) t += ", " + w;
  return t + ".";
}

std::string topical_text(const Subject& s, text::Rng& rng) {
  const std::string v = std::to_string(s.value);
  return capitalized(filler(rng, 2)) + " logs list " + v + " crates, " + v + " lanterns and " + v + " " +
         filler(rng, 1) + " trips.";
}

}  // namespace

std::string_view to_string(DistractorStyle s) { return s == DistractorStyle::lexical ? "lexical" : "topical"; }

DistractorStyle parse_distractor_style(std::string_view s) {
  if (s == "lexical") return DistractorStyle::lexical;
  if (s == "topical") return DistractorStyle::topical;
  throw InvalidArgument("unknown distractor style '" + std::string(s) + "' (expected lexical or topical)");
}

void SyntheticSpec::validate() const {
  if (questions == 0) throw InvalidArgument("synthetic spec needs at least one question");
  if (insight == 0) throw InvalidArgument("synthetic spec needs at least one insight per question");
  if (name.empty()) throw InvalidArgument("synthetic spec needs a corpus name");
}

Corpus generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec) {
  spec.validate();
  text::Rng rng(text::mix64(seed ^ 0x5eed5eedULL));
  Corpus corpus;
  corpus.name = spec.name;
  corpus.granularity = Granularity::turn;
  std::set<std::string> used_names;
  const std::size_t n = spec.candidates_per_question();
  const std::size_t qwidth = std::to_string(spec.questions - 1).size();
  const std::size_t cwidth = std::max<std::size_t>(2, std::to_string(n - 1).size());

  for (std::size_t q = 0; q < spec.questions; ++q) {
    Subject s;
    s.name = fresh_name(rng, used_names);
    s.entity = kEntities[rng.below(kEntities.size())];
    s.attribute = kAttributes[rng.below(kAttributes.size())];
    s.value = 10 + static_cast<int>(rng.below(90));

    std::vector<std::pair<std::string, std::string>> pool;  // (label, text)
    for (std::size_t i = 0; i < spec.insight; ++i)
      pool.emplace_back("insight", insight_text(s, rng, spec.insight_padding));
    for (std::size_t i = 0; i < spec.duplicate; ++i) pool.emplace_back("duplicate", duplicate_text(s, rng));
    for (std::size_t i = 0; i < spec.redherring; ++i) {
      if (spec.distractor_style == DistractorStyle::lexical)
        pool.emplace_back("redherring", redherring_text(s, rng));
      else
        pool.emplace_back("distractor", topical_text(s, rng));
    }
    for (std::size_t i = 0; i < spec.counterfactual; ++i)
      pool.emplace_back("counterfactual", counterfactual_text(s, other_value(rng, s.value)));
    rng.shuffle(pool);

    QuestionInstance inst;
    inst.qid = "q" + padded_id(q, qwidth);
    inst.query = "What is the " + s.attribute + " of the " + s.entity + " " + s.name + "?";
    inst.answer = std::to_string(s.value);
    inst.granularity = Granularity::turn;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      Candidate c;
      c.id = "c" + padded_id(i, cwidth);
      c.text = std::move(pool[i].second);
      c.timestamp = static_cast<std::int64_t>(i);
      c.label = pool[i].first;
      if (c.label == "insight") inst.gold_ids.insert(c.id);
      inst.candidates.push_back(std::move(c));
    }
    corpus.instances.push_back(std::move(inst));
  }
  validate(corpus);
  return corpus;
}

}  // namespace ctxshape
