#include "kge/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_set>

#include <json.hpp>

namespace kge {

namespace {

std::string format_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string pseudoword(std::mt19937_64& rng, std::unordered_set<std::string>& taken) {
  static const char consonants[] = "bcdfghjklmnprstvz";
  static const char vowels[] = "aeiou";
  std::uniform_int_distribution<int> len_dist(5, 8);
  std::uniform_int_distribution<int> c_dist(0, sizeof(consonants) - 2);
  std::uniform_int_distribution<int> v_dist(0, sizeof(vowels) - 2);
  for (;;) {
    int len = len_dist(rng);
    std::string w;
    for (int i = 0; i < len; ++i) {
      w.push_back(i % 2 == 0 ? consonants[c_dist(rng)] : vowels[v_dist(rng)]);
    }
    if (taken.insert(w).second) return w;
  }
}

double round_to(double v, double step) { return std::round(v / step) * step; }

struct DiseaseProfile {
  std::string name;
  std::string category;
  double age_lo, age_hi;
  double weight_lo, weight_hi;
  std::vector<int> preferred_drugs;       // indexes into the drug code pool
  std::vector<int> preferred_treatments;  // indexes into the treatment code pool
};

}  // namespace

const char* to_string(SignalMode m) {
  return m == SignalMode::StructuralOnly ? "structural_only" : "literal_dependent";
}

SignalMode signal_mode_from_string(const std::string& s) {
  if (s == "structural_only") return SignalMode::StructuralOnly;
  if (s == "literal_dependent") return SignalMode::LiteralDependent;
  throw ConfigError("unknown signal mode '" + s + "'");
}

SynthCorpus generate_corpus(const SynthConfig& config) {
  if (config.n_animals < 1 || config.n_diseases < 1 || config.n_symptom_vocab < 1 ||
      config.min_records_per_animal < 1 ||
      config.max_records_per_animal < config.min_records_per_animal) {
    throw ConfigError("synth: counts must be >= 1 and the record range nonempty");
  }
  if (config.n_symptom_vocab < config.n_diseases) {
    throw ConfigError("synth: symptom vocabulary (" + std::to_string(config.n_symptom_vocab) +
                      ") smaller than disease count (" + std::to_string(config.n_diseases) + ")");
  }

  std::mt19937_64 master(config.seed);
  std::unordered_set<std::string> taken;

  std::vector<std::string> vocab;
  vocab.reserve(config.n_symptom_vocab);
  for (int i = 0; i < config.n_symptom_vocab; ++i) vocab.push_back(pseudoword(master, taken));

  const int sig_size = std::min(12, config.n_symptom_vocab / config.n_diseases);
  const int n_categories = std::max(1, std::min(6, config.n_diseases / 2));

  const int n_drug_codes = 40;
  const int n_treatment_codes = 40;
  std::vector<std::string> drug_codes, treatment_codes;
  for (int i = 0; i < n_drug_codes; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "DRG%03d", i);
    drug_codes.push_back(buf);
  }
  for (int i = 0; i < n_treatment_codes; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "T%03d", i);
    treatment_codes.push_back(buf);
  }

  std::vector<std::string> treatments, prescriptions, comment_pool;
  for (int i = 0; i < 25; ++i) treatments.push_back("proc " + pseudoword(master, taken));
  for (int i = 0; i < 30; ++i) {
    std::uniform_int_distribution<int> mg(1, 40);
    prescriptions.push_back("dose " + std::to_string(5 * mg(master)) + "mg " +
                            pseudoword(master, taken));
  }
  for (int i = 0; i < 40; ++i) comment_pool.push_back(pseudoword(master, taken));

  const std::vector<std::string> species = {"canine", "feline", "avian", "rabbit"};
  std::vector<std::vector<std::string>> breeds(species.size());
  for (std::size_t s = 0; s < species.size(); ++s) {
    for (int b = 0; b < 5; ++b) breeds[s].push_back(species[s] + " breed " + std::to_string(b));
  }
  const std::vector<std::string> genders = {"male", "female", "neutered male", "spayed female"};

  SynthCorpus corpus;
  std::vector<DiseaseProfile> profiles(config.n_diseases);
  for (int d = 0; d < config.n_diseases; ++d) {
    DiseaseProfile& p = profiles[d];
    char buf[24];
    std::snprintf(buf, sizeof(buf), "disease %02d", d);
    p.name = buf;
    p.category = "category " + std::to_string(d % n_categories);
    double frac = config.n_diseases == 1 ? 0.5
                                         : static_cast<double>(d) / (config.n_diseases - 1);
    double age_center = 1.0 + 13.0 * frac;
    p.age_lo = std::max(0.0, age_center - 3.0);
    p.age_hi = std::min(16.0, age_center + 3.0);
    double weight_center = 3.0 + 30.0 * frac;
    p.weight_lo = std::max(0.5, weight_center - 8.0);
    p.weight_hi = std::min(42.0, weight_center + 8.0);
    std::uniform_int_distribution<int> drug_pick(0, n_drug_codes - 1);
    std::uniform_int_distribution<int> treat_pick(0, n_treatment_codes - 1);
    for (int i = 0; i < 3; ++i) {
      p.preferred_drugs.push_back(drug_pick(master));
      p.preferred_treatments.push_back(treat_pick(master));
    }

    corpus.disease_names.push_back(p.name);
    std::vector<std::string> sig(vocab.begin() + d * sig_size,
                                 vocab.begin() + (d + 1) * sig_size);
    corpus.signatures.push_back(std::move(sig));
  }
  corpus.noise_pool.assign(vocab.begin() + config.n_diseases * sig_size, vocab.end());
  if (corpus.noise_pool.empty()) corpus.noise_pool.push_back(vocab.back());

  const bool literal = config.signal_mode == SignalMode::LiteralDependent;
  long record_counter = 0;

  for (int a = 0; a < config.n_animals; ++a) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(a)};
    std::mt19937_64 rng(seq);

    char animal_buf[16];
    std::snprintf(animal_buf, sizeof(animal_buf), "A%05d", a);
    std::uniform_int_distribution<std::size_t> sp_pick(0, species.size() - 1);
    std::size_t sp = sp_pick(rng);
    std::uniform_int_distribution<std::size_t> br_pick(0, breeds[sp].size() - 1);
    std::string breed = breeds[sp][br_pick(rng)];
    std::uniform_int_distribution<std::size_t> g_pick(0, genders.size() - 1);
    std::string gender = genders[g_pick(rng)];

    std::uniform_int_distribution<int> rec_count(config.min_records_per_animal,
                                                 config.max_records_per_animal);
    int n_records = rec_count(rng);

    for (int k = 0; k < n_records; ++k) {
      std::uniform_int_distribution<int> d_pick(0, config.n_diseases - 1);
      int d = d_pick(rng);
      const DiseaseProfile& p = profiles[d];

      EmrRecord rec;
      char rec_buf[16];
      std::snprintf(rec_buf, sizeof(rec_buf), "M%06ld", record_counter++);
      rec.record_id = rec_buf;
      rec.animal_id = animal_buf;
      rec.species = species[sp];
      rec.breed = breed;
      rec.gender = gender;
      rec.disease = p.name;
      rec.disease_category = p.category;

      std::bernoulli_distribution miss_age(0.02), miss_weight(0.03), miss_symptom(0.02),
          miss_rx(0.3), miss_drug(0.1), miss_treatment(0.3), miss_code(0.1),
          miss_comment(literal ? 0.25 : 0.5);

      if (!miss_age(rng)) {
        double lo = literal ? p.age_lo : 0.0;
        double hi = literal ? p.age_hi : 16.0;
        std::uniform_real_distribution<double> age_draw(lo, hi);
        rec.age = std::max(0.0, round_to(age_draw(rng), 1.0));
      }
      if (!miss_weight(rng)) {
        double lo = literal ? p.weight_lo : 0.5;
        double hi = literal ? p.weight_hi : 42.0;
        std::uniform_real_distribution<double> w_draw(lo, hi);
        rec.weight = std::max(0.1, round_to(w_draw(rng), 0.1));
      }
      if (!miss_symptom(rng)) {
        std::uniform_int_distribution<int> n_phrases(3, 5);
        int n = n_phrases(rng);
        std::vector<std::string> pool =
            literal ? corpus.signatures[d] : vocab;  // uniform mode ignores the signature
        std::vector<std::string> chosen;
        for (int i = 0; i < n; ++i) {
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          chosen.push_back(pool[pick(rng)]);
        }
        std::bernoulli_distribution add_noise(0.1);
        if (literal && add_noise(rng)) {
          std::uniform_int_distribution<std::size_t> pick(0, corpus.noise_pool.size() - 1);
          chosen.push_back(corpus.noise_pool[pick(rng)]);
        }
        std::string text;
        for (std::size_t i = 0; i < chosen.size(); ++i) {
          if (i) text += " ";
          text += chosen[i];
        }
        rec.symptom = text;
      }
      std::bernoulli_distribution prefer(0.9);
      if (!miss_rx(rng)) {
        std::uniform_int_distribution<std::size_t> rx_pick(0, prescriptions.size() - 1);
        rec.prescription = prescriptions[rx_pick(rng)];
        if (!miss_drug(rng)) {
          int code;
          if (!literal && prefer(rng)) {
            std::uniform_int_distribution<std::size_t> pp(0, p.preferred_drugs.size() - 1);
            code = p.preferred_drugs[pp(rng)];
          } else {
            std::uniform_int_distribution<int> dp(0, n_drug_codes - 1);
            code = dp(rng);
          }
          rec.drug_code = drug_codes[code];
        }
      }
      if (!miss_treatment(rng)) {
        std::uniform_int_distribution<std::size_t> t_pick(0, treatments.size() - 1);
        rec.treatment = treatments[t_pick(rng)];
        if (!miss_code(rng)) {
          int code;
          if (!literal && prefer(rng)) {
            std::uniform_int_distribution<std::size_t> pp(0, p.preferred_treatments.size() - 1);
            code = p.preferred_treatments[pp(rng)];
          } else {
            std::uniform_int_distribution<int> tp(0, n_treatment_codes - 1);
            code = tp(rng);
          }
          rec.treatment_code = treatment_codes[code];
        }
      }
      if (!miss_comment(rng)) {
        // Free-text notes tend to restate the presenting complaint, so when the
        // corpus plants signal in the text the comment paraphrases the symptom
        // signature; otherwise it is generic filler.
        std::uniform_int_distribution<int> n_words(3, 6);
        int n = n_words(rng);
        std::bernoulli_distribution filler(0.3);
        std::string text;
        for (int i = 0; i < n; ++i) {
          const std::vector<std::string>& pool =
              (literal && !filler(rng)) ? corpus.signatures[d] : comment_pool;
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          if (i) text += " ";
          text += pool[pick(rng)];
        }
        rec.comment = text;
      }
      corpus.records.push_back(std::move(rec));
    }
  }
  return corpus;
}

namespace {

std::string csv_escape(const std::string& s) {
  bool needs_quotes = s.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string opt_str(const std::optional<std::string>& v) { return v ? csv_escape(*v) : ""; }
std::string opt_num(const std::optional<double>& v) { return v ? format_num(*v) : ""; }

}  // namespace

std::string records_to_csv(const std::vector<EmrRecord>& records) {
  std::string out =
      "record_id,animal_id,species,breed,gender,age,weight,symptom,disease,disease_category,"
      "prescription,drug_code,treatment,treatment_code,comment";
  for (const EmrRecord& r : records) {
    out += "\n";
    out += csv_escape(r.record_id) + "," + csv_escape(r.animal_id) + "," + opt_str(r.species) +
           "," + opt_str(r.breed) + "," + opt_str(r.gender) + "," + opt_num(r.age) + "," +
           opt_num(r.weight) + "," + opt_str(r.symptom) + "," + opt_str(r.disease) + "," +
           opt_str(r.disease_category) + "," + opt_str(r.prescription) + "," +
           opt_str(r.drug_code) + "," + opt_str(r.treatment) + "," + opt_str(r.treatment_code) +
           "," + opt_str(r.comment);
  }
  out += "\n";
  return out;
}

std::string records_to_jsonl(const std::vector<EmrRecord>& records) {
  std::string out;
  for (const EmrRecord& r : records) {
    nlohmann::ordered_json j;
    j["record_id"] = r.record_id;
    j["animal_id"] = r.animal_id;
    auto put_str = [&j](const char* key, const std::optional<std::string>& v) {
      if (v) j[key] = *v;
    };
    if (r.age) j["age"] = *r.age;
    if (r.weight) j["weight"] = *r.weight;
    put_str("species", r.species);
    put_str("breed", r.breed);
    put_str("gender", r.gender);
    put_str("symptom", r.symptom);
    put_str("disease", r.disease);
    put_str("disease_category", r.disease_category);
    put_str("prescription", r.prescription);
    put_str("drug_code", r.drug_code);
    put_str("treatment", r.treatment);
    put_str("treatment_code", r.treatment_code);
    put_str("comment", r.comment);
    out += j.dump();
    out += "\n";
  }
  return out;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  if (!out) throw IoError("failed writing file: " + path);
}

}  // namespace

void write_records_csv(const std::vector<EmrRecord>& records, const std::string& path) {
  write_file(path, records_to_csv(records));
}

void write_records_jsonl(const std::vector<EmrRecord>& records, const std::string& path) {
  write_file(path, records_to_jsonl(records));
}

}  // namespace kge
