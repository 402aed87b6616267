#include "ecgnn/datagen.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ecgnn/errors.hpp"
#include "ecgnn/rng.hpp"
#include "ecgnn/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ecgnn {

namespace {

constexpr double kCodeAmp = 1.5;  // planted pattern entry magnitude

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// rows of +-kCodeAmp entries; the fixed vocabulary of planted signals
Tensor sign_patterns(Rng& rng, std::size_t n, std::size_t d) {
    Tensor t = Tensor::zeros(n, d);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = (rng.next_u64() & 1) ? kCodeAmp : -kCodeAmp;
    return t;
}

// n mutually orthogonal rows (n <= d), each of norm kCodeAmp * sqrt(d);
// orthogonality keeps planted codes free of cross-talk
Tensor orthogonal_patterns(Rng& rng, std::size_t n, std::size_t d) {
    if (n > d) throw ConfigError("orthogonal_patterns: more patterns than dimensions");
    Tensor t = Tensor::zeros(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t attempt = 0;; ++attempt) {
            for (std::size_t j = 0; j < d; ++j) t(i, j) = rng.normal();
            for (std::size_t k = 0; k < i; ++k) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += t(i, j) * t(k, j);
                const double scale = dot / (kCodeAmp * kCodeAmp * static_cast<double>(d));
                for (std::size_t j = 0; j < d; ++j) t(i, j) -= scale * t(k, j);
            }
            double norm = 0.0;
            for (std::size_t j = 0; j < d; ++j) norm += t(i, j) * t(i, j);
            if (norm > 1e-12) {
                const double target = kCodeAmp * std::sqrt(static_cast<double>(d));
                const double scale = target / std::sqrt(norm);
                for (std::size_t j = 0; j < d; ++j) t(i, j) *= scale;
                break;
            }
            if (attempt > 8) throw ConfigError("orthogonal_patterns: degenerate draw");
        }
    }
    return t;
}

Tensor noise_matrix(Rng& rng, std::size_t n, std::size_t d, double stddev) {
    Tensor t = Tensor::zeros(n, d);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal(0.0, stddev);
    return t;
}

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// --- pattern banks shared between splits of one seed ---

struct WordPatterns {
    Tensor class_codes;  // C x d
    Tensor slot_codes;   // nc_hi x d  (question-side row-index code)
};

WordPatterns word_patterns(const GenOptions& opt) {
    Rng rng = Rng(opt.seed).fork(fnv1a("word-patterns"));
    WordPatterns p;
    p.class_codes = sign_patterns(rng, opt.n_classes, opt.sizes.d);
    p.slot_codes = sign_patterns(rng, opt.sizes.nc_hi, opt.sizes.d);
    return p;
}

struct CountPatterns {
    Tensor event;         // 1 x d video event pattern
    Tensor caption_code;  // 1 x d caption-side count code
};

CountPatterns count_patterns(const GenOptions& opt) {
    Rng rng = Rng(opt.seed).fork(fnv1a("count-patterns"));
    CountPatterns p;
    p.event = sign_patterns(rng, 1, opt.sizes.d);
    p.caption_code = sign_patterns(rng, 1, opt.sizes.d);
    return p;
}

struct ChoicePatterns {
    Tensor dict;    // P x d base patterns (video space)
    Tensor b1, b2;  // d x d maps into the candidate (question) space
    std::size_t n_patterns() const { return dict.rows(); }
};

ChoicePatterns choice_patterns(const GenOptions& opt) {
    Rng rng = Rng(opt.seed).fork(fnv1a("choice-patterns"));
    ChoicePatterns p;
    const std::size_t d = opt.sizes.d;
    p.dict = sign_patterns(rng, 5, d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    p.b1 = noise_matrix(rng, d, d, s);
    p.b2 = noise_matrix(rng, d, d, s);
    return p;
}

Tensor pair_embedding(const ChoicePatterns& p, std::size_t a, std::size_t b) {
    const std::size_t d = p.dict.cols();
    Tensor e = Tensor::zeros(1, d);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += p.b1(i, j) * p.dict(a, j) + p.b2(i, j) * p.dict(b, j);
        e.at(i) = s;
    }
    return e;
}

Dataset make_base(Task task, const GenOptions& opt, const std::string& split) {
    Dataset data;
    data.task = task;
    data.d_c = data.d_v = data.d_q = opt.sizes.d;
    data.n_classes = task == Task::word ? opt.n_classes : 0;
    data.n_candidates = task == Task::choice ? opt.n_candidates : 0;
    data.seed = opt.seed;
    data.split = split;
    data.samples.reserve(opt.n_samples);
    return data;
}

Rng split_stream(const GenOptions& opt, const std::string& kind, const std::string& split) {
    return Rng(opt.seed).fork(fnv1a(kind + ":" + split));
}

}  // namespace

Dataset gen_word_task(const GenOptions& opt, const std::string& split) {
    if (opt.n_classes < 2) throw ConfigError("gen_word_task: need n_classes >= 2");
    const WordPatterns pat = word_patterns(opt);
    const std::size_t d = opt.sizes.d;
    Dataset data = make_base(Task::word, opt, split);
    Rng rng = split_stream(opt, "word", split);

    for (std::size_t s = 0; s < opt.n_samples; ++s) {
        Sample smp;
        const std::size_t n_c = draw(rng, opt.sizes.nc_lo, opt.sizes.nc_hi);
        const std::size_t n_v = draw(rng, opt.sizes.nv_lo, opt.sizes.nv_hi);
        const std::size_t n_q = draw(rng, opt.sizes.nq_lo, opt.sizes.nq_hi);
        const std::size_t cls = static_cast<std::size_t>(rng.below(opt.n_classes));
        const std::size_t row = static_cast<std::size_t>(rng.below(n_c));

        // every caption row carries its slot marker; the row the question
        // points at carries the answer's class code, about half of the other
        // rows carry decoy codes of wrong classes, so the answer is read
        // caption-row(question slot)
        smp.f_c = noise_matrix(rng, n_c, d, opt.background);
        std::vector<std::size_t> others;
        for (std::size_t i = 0; i < n_c; ++i) {
            if (i != row) others.push_back(i);
        }
        rng.shuffle(others);
        const std::size_t n_decoys = (others.size() + 1) / 2;
        std::vector<bool> coded(n_c, false);
        coded[row] = true;
        for (std::size_t k = 0; k < n_decoys; ++k) coded[others[k]] = true;
        for (std::size_t i = 0; i < n_c; ++i) {
            if (!coded[i]) {
                for (std::size_t j = 0; j < d; ++j) smp.f_c(i, j) += 1.5 * pat.slot_codes(i, j);
                continue;
            }
            std::size_t ci = cls;
            if (i != row) {
                ci = static_cast<std::size_t>(rng.below(opt.n_classes - 1));
                if (ci >= cls) ++ci;
            }
            for (std::size_t j = 0; j < d; ++j) {
                smp.f_c(i, j) =
                    1.5 * pat.slot_codes(i, j) + pat.class_codes(ci, j) + rng.normal(0.0, opt.noise);
            }
        }
        smp.f_v = noise_matrix(rng, n_v, d, opt.background);
        smp.f_q = noise_matrix(rng, n_q, d, opt.background);
        for (std::size_t j = 0; j < d; ++j) {
            smp.f_q(n_q - 1, j) = 1.5 * pat.slot_codes(row, j) + rng.normal(0.0, opt.noise);
        }

        smp.planted_row = static_cast<int>(row);
        smp.answer = opt.shuffle_labels ? static_cast<int>(rng.below(opt.n_classes)) : static_cast<int>(cls);
        data.samples.push_back(std::move(smp));
    }
    return data;
}

Dataset gen_count_task(const GenOptions& opt, const std::string& split) {
    const CountPatterns pat = count_patterns(opt);
    const std::size_t d = opt.sizes.d;
    Dataset data = make_base(Task::number, opt, split);
    Rng rng = split_stream(opt, "count", split);

    for (std::size_t s = 0; s < opt.n_samples; ++s) {
        Sample smp;
        const std::size_t n_c = draw(rng, opt.sizes.nc_lo, opt.sizes.nc_hi);
        const std::size_t n_v = draw(rng, opt.sizes.nv_lo, opt.sizes.nv_hi);
        const std::size_t n_q = draw(rng, opt.sizes.nq_lo, opt.sizes.nq_hi);
        const std::size_t max_count = std::min<std::size_t>(10, n_v);
        const std::size_t count = static_cast<std::size_t>(rng.below(max_count + 1));

        std::vector<std::size_t> idx(n_v);
        for (std::size_t i = 0; i < n_v; ++i) idx[i] = i;
        rng.shuffle(idx);

        smp.f_v = noise_matrix(rng, n_v, d, opt.background);
        for (std::size_t e = 0; e < count; ++e) {
            for (std::size_t j = 0; j < d; ++j) smp.f_v(idx[e], j) = pat.event.at(j) + rng.normal(0.0, opt.noise);
        }
        smp.f_c = noise_matrix(rng, n_c, d, opt.background);
        const double level = static_cast<double>(count) / 10.0;
        for (std::size_t j = 0; j < d; ++j) {
            smp.f_c(0, j) = level * pat.caption_code.at(j) + rng.normal(0.0, opt.noise);
        }
        smp.f_q = noise_matrix(rng, n_q, d, opt.background);

        smp.answer = opt.shuffle_labels ? static_cast<int>(rng.below(max_count + 1)) : static_cast<int>(count);
        data.samples.push_back(std::move(smp));
    }
    return data;
}

Dataset gen_choice_task(const GenOptions& opt, const std::string& split) {
    if (opt.n_candidates < 2) throw ConfigError("gen_choice_task: need n_candidates >= 2");
    const ChoicePatterns pat = choice_patterns(opt);
    const std::size_t d = opt.sizes.d;
    const std::size_t n_pat = pat.n_patterns();
    Dataset data = make_base(Task::choice, opt, split);
    Rng rng = split_stream(opt, "choice", split);

    // all ordered pairs (a, b), a != b
    std::vector<std::pair<std::size_t, std::size_t>> all_pairs;
    for (std::size_t a = 0; a < n_pat; ++a)
        for (std::size_t b = 0; b < n_pat; ++b)
            if (a != b) all_pairs.emplace_back(a, b);
    if (opt.n_candidates > all_pairs.size()) {
        throw ConfigError("gen_choice_task: K exceeds the number of distinct transition pairs");
    }

    for (std::size_t s = 0; s < opt.n_samples; ++s) {
        Sample smp;
        const std::size_t n_c = draw(rng, opt.sizes.nc_lo, opt.sizes.nc_hi);
        const std::size_t n_v = draw(rng, opt.sizes.nv_lo, opt.sizes.nv_hi);
        const std::size_t n_q = draw(rng, opt.sizes.nq_lo, opt.sizes.nq_hi);

        const std::size_t a = static_cast<std::size_t>(rng.below(n_pat));
        std::size_t b = static_cast<std::size_t>(rng.below(n_pat - 1));
        if (b >= a) ++b;

        // two video segments carrying the ordered transition
        smp.f_v = Tensor::zeros(n_v, d);
        const std::size_t first_half = (n_v + 1) / 2;
        for (std::size_t i = 0; i < n_v; ++i) {
            const std::size_t from = (i < first_half) ? a : b;
            for (std::size_t j = 0; j < d; ++j) smp.f_v(i, j) = pat.dict(from, j) + rng.normal(0.0, opt.noise);
        }
        smp.f_c = noise_matrix(rng, n_c, d, opt.background);
        smp.f_q = noise_matrix(rng, n_q, d, opt.background);

        // candidates: the true pair, the swapped pair, then random others
        std::vector<std::pair<std::size_t, std::size_t>> chosen = {{a, b}, {b, a}};
        while (chosen.size() < opt.n_candidates) {
            const auto pick = all_pairs[rng.below(all_pairs.size())];
            if (std::find(chosen.begin(), chosen.end(), pick) == chosen.end()) chosen.push_back(pick);
        }
        std::vector<std::size_t> order(opt.n_candidates);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        smp.candidates = Tensor::zeros(opt.n_candidates, d);
        std::size_t correct_pos = 0;
        for (std::size_t pos = 0; pos < opt.n_candidates; ++pos) {
            const auto pr = chosen[order[pos]];
            if (order[pos] == 0) correct_pos = pos;
            Tensor e = pair_embedding(pat, pr.first, pr.second);
            for (std::size_t j = 0; j < d; ++j) smp.candidates(pos, j) = e.at(j);
        }
        smp.answer = opt.shuffle_labels ? static_cast<int>(rng.below(opt.n_candidates))
                                        : static_cast<int>(correct_pos);
        data.samples.push_back(std::move(smp));
    }
    return data;
}

Dataset generate(Task task, const GenOptions& opt, const std::string& split) {
    switch (task) {
        case Task::word: return gen_word_task(opt, split);
        case Task::number: return gen_count_task(opt, split);
        case Task::choice: return gen_choice_task(opt, split);
    }
    throw ConfigError("generate: unknown task");
}

double word_oracle_accuracy(const Dataset& data, const GenOptions& opt) {
    const WordPatterns pat = word_patterns(opt);
    std::size_t hits = 0;
    for (const Sample& s : data.samples) {
        const std::size_t row = static_cast<std::size_t>(s.planted_row);
        std::size_t best = 0;
        double best_dot = -1e300;
        for (std::size_t c = 0; c < opt.n_classes; ++c) {
            double dot = 0.0;
            for (std::size_t j = 0; j < s.f_c.cols(); ++j) {
                dot += (s.f_c(row, j) - 1.5 * pat.slot_codes(row, j)) * pat.class_codes(c, j);
            }
            if (dot > best_dot) {
                best_dot = dot;
                best = c;
            }
        }
        if (best == static_cast<std::size_t>(s.answer)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.samples.size());
}

double choice_oracle_accuracy(const Dataset& data, const GenOptions& opt) {
    const ChoicePatterns pat = choice_patterns(opt);
    const std::size_t n_pat = pat.n_patterns();
    std::size_t hits = 0;
    for (const Sample& s : data.samples) {
        const std::size_t n_v = s.f_v.rows(), d = s.f_v.cols();
        const std::size_t first_half = (n_v + 1) / 2;
        auto segment_pattern = [&](std::size_t lo, std::size_t hi) {
            std::vector<double> mean(d, 0.0);
            for (std::size_t i = lo; i < hi; ++i)
                for (std::size_t j = 0; j < d; ++j) mean[j] += s.f_v(i, j);
            std::size_t best = 0;
            double best_dot = -1e300;
            for (std::size_t p = 0; p < n_pat; ++p) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += mean[j] * pat.dict(p, j);
                if (dot > best_dot) {
                    best_dot = dot;
                    best = p;
                }
            }
            return best;
        };
        const std::size_t a = segment_pattern(0, first_half);
        const std::size_t b = segment_pattern(first_half, n_v);
        const Tensor want = pair_embedding(pat, a, b);
        std::size_t best_pos = 0;
        double best_dist = 1e300;
        for (std::size_t k = 0; k < s.candidates.rows(); ++k) {
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = s.candidates(k, j) - want.at(j);
                dist += diff * diff;
            }
            if (dist < best_dist) {
                best_dist = dist;
                best_pos = k;
            }
        }
        if (best_pos == static_cast<std::size_t>(s.answer)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.samples.size());
}

double count_mean_predictor_mse(const Dataset& data) {
    double mean = 0.0;
    for (const Sample& s : data.samples) mean += s.answer;
    mean /= static_cast<double>(data.samples.size());
    double mse = 0.0;
    for (const Sample& s : data.samples) mse += (s.answer - mean) * (s.answer - mean);
    return mse / static_cast<double>(data.samples.size());
}

double label_chi_square(const Dataset& data) {
    std::size_t k = 0;
    for (const Sample& s : data.samples) k = std::max(k, static_cast<std::size_t>(s.answer) + 1);
    std::vector<double> counts(k, 0.0);
    for (const Sample& s : data.samples) counts[static_cast<std::size_t>(s.answer)] += 1.0;
    const double expect = static_cast<double>(data.samples.size()) / static_cast<double>(k);
    double chi = 0.0;
    for (double c : counts) chi += (c - expect) * (c - expect) / expect;
    return chi;
}

// ------------------------------------------------------------------ disk

void write_dataset(const std::string& dir, const Dataset& data, const GenOptions& opt) {
    fs::create_directories(fs::path(dir) / "tensors");

    json manifest;
    manifest["format"] = "ecgnn-dataset";
    manifest["version"] = 1;
    manifest["task"] = task_name(data.task);
    manifest["split"] = data.split;
    manifest["seed"] = data.seed;
    manifest["n_samples"] = data.samples.size();
    if (data.task == Task::word) manifest["n_classes"] = data.n_classes;
    if (data.task == Task::choice) manifest["n_candidates"] = data.n_candidates;
    manifest["dims"] = {{"d_c", data.d_c}, {"d_v", data.d_v}, {"d_q", data.d_q}};
    manifest["sizes"] = {{"n_c", {opt.sizes.nc_lo, opt.sizes.nc_hi}},
                         {"n_v", {opt.sizes.nv_lo, opt.sizes.nv_hi}},
                         {"n_q", {opt.sizes.nq_lo, opt.sizes.nq_hi}}};
    manifest["noise"] = opt.noise;
    manifest["background"] = opt.background;
    manifest["shuffle_labels"] = opt.shuffle_labels;

    json samples = json::array();
    char name[64];
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const Sample& s = data.samples[i];
        json entry;
        auto store = [&](const char* tag, const Tensor& t) {
            std::snprintf(name, sizeof(name), "tensors/s%06zu_%s.ecgf", i, tag);
            write_tensor((fs::path(dir) / name).string(), t, 1);
            return std::string(name);
        };
        entry["f_c"] = store("c", s.f_c);
        entry["f_v"] = store("v", s.f_v);
        entry["f_q"] = store("q", s.f_q);
        if (data.task == Task::choice) entry["f_cand"] = store("cand", s.candidates);
        entry["answer"] = s.answer;
        if (s.planted_row >= 0) entry["planted_row"] = s.planted_row;
        samples.push_back(std::move(entry));
    }
    manifest["samples"] = std::move(samples);

    // manifest written last, atomically
    const fs::path tmp = fs::path(dir) / "manifest.json.tmp";
    const fs::path final_path = fs::path(dir) / "manifest.json";
    {
        std::ofstream os(tmp);
        if (!os) throw FormatError("write_dataset: cannot write " + tmp.string());
        os << manifest.dump(2) << "\n";
    }
    fs::rename(tmp, final_path);
}

Dataset load_dataset(const std::string& dir) {
    const fs::path mpath = fs::path(dir) / "manifest.json";
    std::ifstream is(mpath);
    if (!is) throw FormatError("load_dataset: missing manifest " + mpath.string());
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw FormatError("load_dataset: malformed manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "ecgnn-dataset") {
        throw FormatError("load_dataset: not an ecgnn dataset manifest");
    }

    Dataset data;
    data.task = task_from_string(manifest.at("task").get<std::string>());
    data.split = manifest.value("split", "");
    data.seed = manifest.value("seed", 0ull);
    data.n_classes = manifest.value("n_classes", 0ull);
    data.n_candidates = manifest.value("n_candidates", 0ull);
    data.d_c = manifest.at("dims").at("d_c").get<std::size_t>();
    data.d_v = manifest.at("dims").at("d_v").get<std::size_t>();
    data.d_q = manifest.at("dims").at("d_q").get<std::size_t>();

    for (const json& entry : manifest.at("samples")) {
        Sample s;
        auto fetch = [&](const std::string& rel) {
            const fs::path p = fs::path(dir) / rel;
            if (!fs::exists(p)) throw FormatError("load_dataset: missing tensor file " + p.string());
            return read_tensor(p.string());
        };
        s.f_c = fetch(entry.at("f_c").get<std::string>());
        s.f_v = fetch(entry.at("f_v").get<std::string>());
        s.f_q = fetch(entry.at("f_q").get<std::string>());
        if (entry.contains("f_cand")) s.candidates = fetch(entry.at("f_cand").get<std::string>());
        s.answer = entry.at("answer").get<int>();
        s.planted_row = entry.value("planted_row", -1);
        if (s.f_c.cols() != data.d_c || s.f_v.cols() != data.d_v || s.f_q.cols() != data.d_q) {
            throw FormatError("load_dataset: tensor dims disagree with manifest dims");
        }
        if (data.task == Task::choice &&
            (s.candidates.rank() != 2 || s.candidates.rows() != data.n_candidates ||
             s.candidates.cols() != data.d_q)) {
            throw FormatError("load_dataset: candidate tensor dims disagree with manifest");
        }
        data.samples.push_back(std::move(s));
    }
    return data;
}

}  // namespace ecgnn
