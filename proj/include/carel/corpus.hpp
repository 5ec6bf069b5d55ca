#pragma once

// Corpus data model, line-delimited JSON I/O, vocabulary, bag-of-words
// targets and the synthetic domain-shift generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "carel/types.hpp"

namespace carel {

using Tokens = std::vector<std::string>;

/// None is index 0; the six emotions follow.
enum class Emotion : int { none = 0, happiness, sadness, fear, disgust, anger, surprise };

inline constexpr int kNumEmotionClasses = 7;
inline constexpr std::array<const char*, kNumEmotionClasses> kEmotionNames = {
    "none", "happiness", "sadness", "fear", "disgust", "anger", "surprise"};

inline std::string emotion_name(Emotion e) { return kEmotionNames.at(static_cast<std::size_t>(e)); }

inline Emotion emotion_from_name(const std::string& s) {
  for (std::size_t i = 0; i < kEmotionNames.size(); ++i)
    if (s == kEmotionNames[i]) return static_cast<Emotion>(i);
  throw ParseError("unknown emotion category: " + s);
}

struct GoldPair {
  int emotion_clause = 0;
  int cause_clause = 0;
  Emotion category = Emotion::happiness;

  bool self_chain() const { return emotion_clause == cause_clause; }
  auto operator<=>(const GoldPair&) const = default;
};

struct Document {
  std::string doc_id;
  std::string domain;
  std::vector<Tokens> clauses;
  std::vector<GoldPair> gold_pairs;
  std::optional<std::vector<Emotion>> gold_emotions;

  bool operator==(const Document&) const = default;

  /// Per-clause emotion labels: gold_emotions when present, else derived
  /// from gold_pairs (None everywhere else).
  std::vector<Emotion> emotion_labels() const {
    if (gold_emotions) return *gold_emotions;
    std::vector<Emotion> out(clauses.size(), Emotion::none);
    for (const auto& p : gold_pairs) out[static_cast<std::size_t>(p.emotion_clause)] = p.category;
    return out;
  }
};

inline void validate(const Document& d) {
  const auto fail = [&](const std::string& why) { throw ParseError("document " + d.doc_id + ": " + why); };
  if (d.clauses.empty()) fail("no clauses");
  for (const auto& c : d.clauses)
    if (c.empty()) fail("empty clause");
  const int n = static_cast<int>(d.clauses.size());
  for (const auto& p : d.gold_pairs) {
    if (p.emotion_clause < 0 || p.emotion_clause >= n) fail("emotion clause index out of range");
    if (p.cause_clause < 0 || p.cause_clause >= n) fail("cause clause index out of range");
    if (p.category == Emotion::none) fail("pair category must be an emotion");
  }
  if (d.gold_emotions && static_cast<int>(d.gold_emotions->size()) != n) fail("gold_emotions length differs from clause count");
}

inline nlohmann::json to_json(const Document& d) {
  nlohmann::json j;
  j["doc_id"] = d.doc_id;
  j["domain"] = d.domain;
  j["clauses"] = d.clauses;
  auto pairs = nlohmann::json::array();
  for (const auto& p : d.gold_pairs)
    pairs.push_back({{"emotion", p.emotion_clause}, {"cause", p.cause_clause}, {"category", emotion_name(p.category)}});
  j["gold_pairs"] = std::move(pairs);
  if (d.gold_emotions) {
    auto em = nlohmann::json::array();
    for (auto e : *d.gold_emotions) em.push_back(emotion_name(e));
    j["gold_emotions"] = std::move(em);
  } else {
    j["gold_emotions"] = nullptr;
  }
  return j;
}

inline Document document_from_json(const nlohmann::json& j) {
  Document d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.domain = j.at("domain").get<std::string>();
  d.clauses = j.at("clauses").get<std::vector<Tokens>>();
  for (const auto& p : j.at("gold_pairs"))
    d.gold_pairs.push_back({p.at("emotion").get<int>(), p.at("cause").get<int>(),
                            emotion_from_name(p.at("category").get<std::string>())});
  if (j.contains("gold_emotions") && !j["gold_emotions"].is_null()) {
    std::vector<Emotion> em;
    for (const auto& e : j["gold_emotions"]) em.push_back(emotion_from_name(e.get<std::string>()));
    d.gold_emotions = std::move(em);
  }
  return d;
}

inline std::vector<Document> parse_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document d;
    try {
      d = document_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    validate(d);
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::vector<Document> parse_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file: " + path);
  return parse_corpus(in);
}

inline void write_corpus(const std::vector<Document>& docs, std::ostream& out) {
  for (const auto& d : docs) out << to_json(d).dump() << '\n';
}

inline void write_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write corpus file: " + path);
  write_corpus(docs, out);
}

class Vocabulary {
 public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kUnk = 2;
  static constexpr int kNumSpecial = 3;
  static constexpr std::array<const char*, 3> kSpecialTokens = {"[CLS]", "[SEP]", "[UNK]"};

  Vocabulary() : tokens_(kSpecialTokens.begin(), kSpecialTokens.end()) {
    for (int i = 0; i < kNumSpecial; ++i) index_[tokens_[static_cast<std::size_t>(i)]] = i;
  }

  /// Non-special tokens in index order.
  explicit Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
    for (const auto& w : words) add(w);
  }

  int add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  int index(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  std::vector<std::string> words() const { return {tokens_.begin() + kNumSpecial, tokens_.end()}; }

  std::vector<int> encode(const Tokens& toks) const {
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(index(t));
    return ids;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

  /// One token per line; index = line number + 3.
  void write(std::ostream& out) const {
    for (std::size_t i = kNumSpecial; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  }
  static Vocabulary read(std::istream& in) {
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      v.add(line);
    }
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Tokens with frequency >= min_count, most frequent first, ties broken
/// lexicographically.
inline Vocabulary build_vocab(const std::vector<Tokens>& clauses, std::size_t min_count) {
  std::map<std::string, std::size_t> freq;
  for (const auto& c : clauses)
    for (const auto& t : c) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (const auto& [tok, n] : freq) {
    if (n < min_count) continue;
    bool special = false;
    for (const char* s : Vocabulary::kSpecialTokens) special = special || tok == s;
    if (!special) entries.emplace_back(tok, n);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& e : entries) v.add(e.first);
  return v;
}

inline Vocabulary build_vocab(const std::vector<Document>& docs, std::size_t min_count) {
  std::vector<Tokens> clauses;
  for (const auto& d : docs) clauses.insert(clauses.end(), d.clauses.begin(), d.clauses.end());
  return build_vocab(clauses, min_count);
}

/// Multi-hot bag of words over the vocabulary; multiplicity ignored,
/// [CLS]/[SEP] excluded, out-of-vocabulary tokens set the [UNK] bit.
inline Vector to_bow(const std::vector<int>& ids, std::size_t vocab_size) {
  Vector bow = Vector::Zero(static_cast<Index>(vocab_size));
  for (int id : ids) {
    if (id == Vocabulary::kCls || id == Vocabulary::kSep) continue;
    bow[id] = 1.0;
  }
  return bow;
}

inline Vector to_bow(const Tokens& tokens, const Vocabulary& vocab) { return to_bow(vocab.encode(tokens), vocab.size()); }

// ---------------------------------------------------------------------------
// Synthetic domain-shift corpora
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::size_t n_domains = 2;
  std::vector<std::size_t> docs_per_domain = {200, 100};
  std::size_t min_clauses = 3;
  std::size_t max_clauses = 6;
  /// Phrases per emotion (index 1..6), shared by every domain.
  std::map<Emotion, std::vector<Tokens>> emotion_lexicon;
  /// One token set per domain; pairwise disjoint.
  std::vector<std::vector<std::string>> cause_lexicons;
  std::vector<std::string> distractor_lexicon;
  double self_chain_fraction = 0.2;
  bool cause_before_emotion = true;
  std::uint64_t seed = 7;

  /// Fills any empty lexicon with generated tokens.
  void fill_default_lexicons();
  void check() const;
};

inline SyntheticSpec default_synthetic_spec() {
  SyntheticSpec s;
  s.fill_default_lexicons();
  return s;
}

inline void SyntheticSpec::fill_default_lexicons() {
  if (emotion_lexicon.empty()) {
    const std::array<std::array<const char*, 3>, 6> words = {{
        {"glad", "delighted", "cheerful"},
        {"sorrowful", "heartbroken", "gloomy"},
        {"afraid", "terrified", "anxious"},
        {"disgusted", "repulsed", "nauseated"},
        {"furious", "enraged", "irritated"},
        {"astonished", "amazed", "startled"},
    }};
    const std::array<const char*, 3> verbs = {"felt", "was", "became"};
    for (int e = 1; e <= 6; ++e)
      for (int k = 0; k < 3; ++k)
        emotion_lexicon[static_cast<Emotion>(e)].push_back({verbs[static_cast<std::size_t>(k)],
                                                            words[static_cast<std::size_t>(e - 1)][static_cast<std::size_t>(k)]});
  }
  if (cause_lexicons.empty()) {
    for (std::size_t d = 0; d < n_domains; ++d) {
      std::vector<std::string> lex;
      for (int k = 0; k < 24; ++k) lex.push_back("dom" + std::to_string(d) + "_ev" + std::to_string(k));
      cause_lexicons.push_back(std::move(lex));
    }
  }
  if (distractor_lexicon.empty())
    for (int k = 0; k < 40; ++k) distractor_lexicon.push_back("w" + std::to_string(k));
}

inline void SyntheticSpec::check() const {
  if (n_domains < 1) throw ConfigError("synthetic spec: n_domains must be >= 1");
  if (docs_per_domain.size() != n_domains) throw ConfigError("synthetic spec: docs_per_domain needs one entry per domain");
  if (min_clauses < 2 || max_clauses < min_clauses) throw ConfigError("synthetic spec: need 2 <= min_clauses <= max_clauses");
  if (!(self_chain_fraction >= 0.0 && self_chain_fraction <= 1.0)) throw ConfigError("synthetic spec: self_chain_fraction must be in [0, 1]");
  if (cause_lexicons.size() != n_domains) throw ConfigError("synthetic spec: one cause lexicon per domain required");
  if (distractor_lexicon.size() < 3) throw ConfigError("synthetic spec: distractor lexicon too small");
  std::set<std::string> emo_tokens;
  for (int e = 1; e <= 6; ++e) {
    auto it = emotion_lexicon.find(static_cast<Emotion>(e));
    if (it == emotion_lexicon.end() || it->second.size() < 3)
      throw ConfigError("synthetic spec: each emotion needs >= 3 phrases");
    for (const auto& phrase : it->second) {
      if (phrase.empty()) throw ConfigError("synthetic spec: empty emotion phrase");
      emo_tokens.insert(phrase.begin(), phrase.end());
    }
  }
  std::set<std::string> seen;
  for (const auto& lex : cause_lexicons) {
    if (lex.size() < 3) throw ConfigError("synthetic spec: cause lexicon too small");
    std::set<std::string> mine(lex.begin(), lex.end());
    for (const auto& t : mine) {
      if (seen.count(t)) throw ConfigError("synthetic spec: cause lexicons must be pairwise disjoint (" + t + ")");
      if (emo_tokens.count(t)) throw ConfigError("synthetic spec: emotion lexicon overlaps a cause lexicon (" + t + ")");
    }
    seen.insert(mine.begin(), mine.end());
  }
  for (const auto& t : distractor_lexicon)
    if (seen.count(t) || emo_tokens.count(t)) throw ConfigError("synthetic spec: distractor token reused (" + t + ")");
}

inline std::string domain_name(std::size_t k) { return "domain" + std::to_string(k); }

/// Exactly round(self_chain_fraction * docs) self-chain documents per domain.
inline std::vector<Document> generate_synthetic(const SyntheticSpec& spec) {
  spec.check();
  std::mt19937_64 rng(spec.seed);
  const auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const auto range = [&rng](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const auto draw = [&](const std::vector<std::string>& lex, std::size_t n, Tokens& out) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(lex[pick(lex.size())]);
  };

  std::vector<Document> docs;
  for (std::size_t dom = 0; dom < spec.n_domains; ++dom) {
    const std::size_t n_docs = spec.docs_per_domain[dom];
    const auto n_self = static_cast<std::size_t>(std::llround(spec.self_chain_fraction * static_cast<double>(n_docs)));
    std::vector<char> is_self(n_docs, 0);
    std::fill(is_self.begin(), is_self.begin() + static_cast<std::ptrdiff_t>(n_self), 1);
    std::shuffle(is_self.begin(), is_self.end(), rng);
    const auto& causes = spec.cause_lexicons[dom];

    for (std::size_t i = 0; i < n_docs; ++i) {
      Document d;
      std::ostringstream id;
      id << domain_name(dom) << '-' << std::setw(4) << std::setfill('0') << i;
      d.doc_id = id.str();
      d.domain = domain_name(dom);
      const std::size_t n = range(spec.min_clauses, spec.max_clauses);
      const auto emotion = static_cast<Emotion>(1 + pick(6));
      const auto& phrases = spec.emotion_lexicon.at(emotion);
      const Tokens& phrase = phrases[pick(phrases.size())];

      std::size_t e_idx = 0;
      std::size_t c_idx = 0;
      if (is_self[i]) {
        e_idx = pick(n);
        c_idx = e_idx;
      } else if (spec.cause_before_emotion) {
        e_idx = range(1, n - 1);
        c_idx = range(0, e_idx - 1);
      } else {
        e_idx = pick(n);
        do c_idx = pick(n);
        while (c_idx == e_idx);
      }

      d.clauses.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        Tokens& clause = d.clauses[k];
        if (k == e_idx) {
          if (is_self[i]) draw(causes, range(2, 3), clause);
          else draw(spec.distractor_lexicon, range(1, 2), clause);
          clause.insert(clause.end(), phrase.begin(), phrase.end());
        } else if (k == c_idx) {
          draw(spec.distractor_lexicon, range(0, 1), clause);
          draw(causes, range(2, 3), clause);
          draw(spec.distractor_lexicon, range(0, 1), clause);
        } else {
          draw(spec.distractor_lexicon, range(3, 5), clause);
        }
      }
      d.gold_pairs.push_back({static_cast<int>(e_idx), static_cast<int>(c_idx), emotion});
      std::vector<Emotion> labels(n, Emotion::none);
      labels[e_idx] = emotion;
      d.gold_emotions = std::move(labels);
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  nlohmann::json j;
  j["n_domains"] = s.n_domains;
  j["docs_per_domain"] = s.docs_per_domain;
  j["clauses_per_doc"] = {s.min_clauses, s.max_clauses};
  nlohmann::json emo = nlohmann::json::object();
  for (const auto& [e, phrases] : s.emotion_lexicon) emo[emotion_name(e)] = phrases;
  j["emotion_lexicon"] = std::move(emo);
  j["cause_lexicons"] = s.cause_lexicons;
  j["distractor_lexicon"] = s.distractor_lexicon;
  j["self_chain_fraction"] = s.self_chain_fraction;
  j["cause_before_emotion"] = s.cause_before_emotion;
  j["seed"] = s.seed;
  return j;
}

/// Any field may be omitted; omitted lexicons are generated.
inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.n_domains = j.value("n_domains", s.n_domains);
    if (j.contains("docs_per_domain")) s.docs_per_domain = j["docs_per_domain"].get<std::vector<std::size_t>>();
    if (j.contains("clauses_per_doc")) {
      const auto r = j["clauses_per_doc"].get<std::vector<std::size_t>>();
      if (r.size() != 2) throw ConfigError("synthetic spec: clauses_per_doc must be [min, max]");
      s.min_clauses = r[0];
      s.max_clauses = r[1];
    }
    if (j.contains("emotion_lexicon"))
      for (const auto& [name, phrases] : j["emotion_lexicon"].items())
        s.emotion_lexicon[emotion_from_name(name)] = phrases.get<std::vector<Tokens>>();
    if (j.contains("cause_lexicons")) s.cause_lexicons = j["cause_lexicons"].get<std::vector<std::vector<std::string>>>();
    if (j.contains("distractor_lexicon")) s.distractor_lexicon = j["distractor_lexicon"].get<std::vector<std::string>>();
    s.self_chain_fraction = j.value("self_chain_fraction", s.self_chain_fraction);
    s.cause_before_emotion = j.value("cause_before_emotion", s.cause_before_emotion);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.fill_default_lexicons();
  return s;
}

}  // namespace carel
