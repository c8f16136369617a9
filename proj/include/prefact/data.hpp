#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "prefact/matrix.hpp"
#include "prefact/rng.hpp"

namespace prefact {

constexpr int kUnlabeled = -1;

/// One observed time slice: a feature vector plus optional activity labels.
/// Labels are either both present or both absent; unlabeled segments carry
/// the -1 sentinel and only feed the self-supervised regression objective.
struct Segment {
    std::int64_t video_id = 0;
    int segment_index = 0;
    std::vector<double> features;
    int action_id = kUnlabeled;
    int object_id = kUnlabeled;

    bool labeled() const { return action_id != kUnlabeled; }
};

struct Dataset {
    int dim = 0;
    int num_actions = 0;
    int num_objects = 0;
    std::vector<std::string> action_names;
    std::vector<std::string> object_names;
    std::vector<Segment> segments;  // grouped by video_id, ordered by segment_index

    /// Distinct video ids in first-appearance order.
    std::vector<std::int64_t> video_ids() const {
        std::vector<std::int64_t> ids;
        for (const Segment& s : segments)
            if (ids.empty() || ids.back() != s.video_id) ids.push_back(s.video_id);
        return ids;
    }

    void validate() const {
        std::set<std::int64_t> seen;
        std::int64_t current = -1;
        int expect_index = 0;
        for (const Segment& s : segments) {
            if (static_cast<int>(s.features.size()) != dim)
                throw ValidationError("segment feature length " +
                                      std::to_string(s.features.size()) +
                                      " does not match dataset dim " + std::to_string(dim));
            if (s.video_id != current) {
                if (!seen.insert(s.video_id).second)
                    throw ValidationError("video " + std::to_string(s.video_id) +
                                          " is not contiguous");
                current = s.video_id;
                expect_index = 0;
            }
            if (s.segment_index != expect_index++)
                throw ValidationError("video " + std::to_string(s.video_id) +
                                      " has non-consecutive segment indices");
            bool both = s.action_id != kUnlabeled && s.object_id != kUnlabeled;
            bool neither = s.action_id == kUnlabeled && s.object_id == kUnlabeled;
            if (!both && !neither)
                throw ValidationError("segment labels must be both present or both absent");
            if (both && (s.action_id < 0 || s.action_id >= num_actions || s.object_id < 0 ||
                         s.object_id >= num_objects))
                throw ValidationError("label out of vocab range");
        }
    }
};

/// A (present, future) training pair at a fixed horizon within one video.
struct PairSample {
    Segment present;
    Segment future;
    int horizon = 1;
};

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

/// Markov-chain generator config. States are "activities": (action, object)
/// pairs. The transition spec is either a preset name or an explicit
/// row-stochastic matrix over the states.
struct SynthConfig {
    int dim = 16;
    int num_actions = 3;
    int num_objects = 2;
    std::vector<std::pair<int, int>> activities;      // state -> (action, object)
    std::string preset = "cycle";                     // "cycle" | "bimodal" | "uniform" | ""
    std::vector<std::vector<double>> transition;      // optional explicit matrix
    double noise_sigma = 0.1;
    int episodes = 200;
    int length = 12;
    std::uint64_t seed = 1;
};

namespace detail {
inline long long lcm_ll(long long a, long long b) { return a / std::gcd(a, b) * b; }
}

/// Cycle preset: states walk a fixed ring, and because state s carries
/// activity (s mod A, s mod O) both label tracks are themselves
/// deterministic cycles.
inline SynthConfig cycle_config(int dim, int num_actions, int num_objects, int episodes,
                                int length, double noise_sigma, std::uint64_t seed) {
    SynthConfig c;
    c.dim = dim;
    c.num_actions = num_actions;
    c.num_objects = num_objects;
    c.preset = "cycle";
    c.noise_sigma = noise_sigma;
    c.episodes = episodes;
    c.length = length;
    c.seed = seed;
    int states = static_cast<int>(detail::lcm_ll(num_actions, num_objects));
    for (int s = 0; s < states; ++s)
        c.activities.emplace_back(s % num_actions, s % num_objects);
    return c;
}

/// Bimodal preset: every state has exactly two successors (s+1, s+2) at
/// probability 0.5 each. States enumerate all (action, object) combinations
/// lexicographically, so some states have a deterministic future action
/// (both successors share it) while others are genuinely ambiguous.
inline SynthConfig bimodal_config(int dim, int num_actions, int num_objects, int episodes,
                                  int length, double noise_sigma, std::uint64_t seed) {
    SynthConfig c;
    c.dim = dim;
    c.num_actions = num_actions;
    c.num_objects = num_objects;
    c.preset = "bimodal";
    c.noise_sigma = noise_sigma;
    c.episodes = episodes;
    c.length = length;
    c.seed = seed;
    for (int a = 0; a < num_actions; ++a)
        for (int o = 0; o < num_objects; ++o) c.activities.emplace_back(a, o);
    return c;
}

inline SynthConfig uniform_config(int dim, int num_actions, int num_objects, int episodes,
                                  int length, double noise_sigma, std::uint64_t seed) {
    SynthConfig c = bimodal_config(dim, num_actions, num_objects, episodes, length,
                                   noise_sigma, seed);
    c.preset = "uniform";
    return c;
}

/// Expands the preset/explicit spec into a validated matrix.
inline std::vector<std::vector<double>> resolve_transition(const SynthConfig& config) {
    int states = static_cast<int>(config.activities.size());
    if (states < 1) throw ValidationError("synthetic config needs at least one activity");
    std::vector<std::vector<double>> t;
    if (!config.transition.empty()) {
        t = config.transition;
    } else if (config.preset == "cycle") {
        t.assign(states, std::vector<double>(states, 0.0));
        for (int s = 0; s < states; ++s) t[s][(s + 1) % states] = 1.0;
    } else if (config.preset == "bimodal") {
        if (states < 3)
            throw ValidationError("bimodal preset needs at least 3 states");
        t.assign(states, std::vector<double>(states, 0.0));
        for (int s = 0; s < states; ++s) {
            t[s][(s + 1) % states] = 0.5;
            t[s][(s + 2) % states] = 0.5;
        }
    } else if (config.preset == "uniform") {
        t.assign(states, std::vector<double>(states, 1.0 / states));
    } else {
        throw ValidationError("unknown transition preset '" + config.preset + "'");
    }
    if (static_cast<int>(t.size()) != states)
        throw ValidationError("transition matrix has " + std::to_string(t.size()) +
                              " rows for " + std::to_string(states) + " states");
    for (int r = 0; r < states; ++r) {
        if (static_cast<int>(t[r].size()) != states)
            throw ValidationError("transition row " + std::to_string(r) + " has wrong length");
        double sum = 0.0;
        for (double p : t[r]) {
            if (p < 0.0)
                throw ValidationError("transition row " + std::to_string(r) +
                                      " has a negative entry");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw ValidationError("transition row " + std::to_string(r) + " sums to " +
                                  std::to_string(sum) + ", expected 1");
    }
    return t;
}

/// State prototypes compose a per-action and a per-object component vector,
/// normalized to unit length. Sharing components across states is what lets
/// a model trained without some (action, object) combination still recognize
/// the action from other combinations.
inline std::vector<std::vector<double>> make_prototypes(const SynthConfig& config, Rng& rng) {
    std::vector<std::vector<double>> action_part(config.num_actions,
                                                 std::vector<double>(config.dim));
    std::vector<std::vector<double>> object_part(config.num_objects,
                                                 std::vector<double>(config.dim));
    for (auto& v : action_part)
        for (double& x : v) x = rng.next_gaussian();
    for (auto& v : object_part)
        for (double& x : v) x = rng.next_gaussian();

    std::vector<std::vector<double>> protos;
    for (auto [a, o] : config.activities) {
        if (a < 0 || a >= config.num_actions || o < 0 || o >= config.num_objects)
            throw ValidationError("activity pair (" + std::to_string(a) + "," +
                                  std::to_string(o) + ") outside vocab");
        std::vector<double> p(config.dim);
        double norm2 = 0.0;
        for (int d = 0; d < config.dim; ++d) {
            p[d] = action_part[a][d] + object_part[o][d];
            norm2 += p[d] * p[d];
        }
        double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        for (double& x : p) x *= inv;
        protos.push_back(std::move(p));
    }
    return protos;
}

inline Dataset generate_synthetic(const SynthConfig& config) {
    if (config.noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");
    if (config.dim < 1 || config.episodes < 1 || config.length < 1)
        throw ValidationError("dim, episodes and length must be positive");
    auto transition = resolve_transition(config);
    int states = static_cast<int>(config.activities.size());

    Rng rng(config.seed);
    auto protos = make_prototypes(config, rng);

    Dataset ds;
    ds.dim = config.dim;
    ds.num_actions = config.num_actions;
    ds.num_objects = config.num_objects;
    for (int a = 0; a < config.num_actions; ++a) ds.action_names.push_back("act" + std::to_string(a));
    for (int o = 0; o < config.num_objects; ++o) ds.object_names.push_back("obj" + std::to_string(o));

    for (int e = 0; e < config.episodes; ++e) {
        int state = static_cast<int>(rng.next_below(states));
        for (int t = 0; t < config.length; ++t) {
            Segment seg;
            seg.video_id = e;
            seg.segment_index = t;
            seg.action_id = config.activities[state].first;
            seg.object_id = config.activities[state].second;
            seg.features.resize(config.dim);
            for (int d = 0; d < config.dim; ++d)
                seg.features[d] = protos[state][d] + config.noise_sigma * rng.next_gaussian();
            ds.segments.push_back(std::move(seg));
            if (t + 1 < config.length) {
                double u = rng.next_double();
                double acc = 0.0;
                int next = states - 1;
                for (int s = 0; s < states; ++s) {
                    acc += transition[state][s];
                    if (u < acc) {
                        next = s;
                        break;
                    }
                }
                state = next;
            }
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Pairing and holdout
// ---------------------------------------------------------------------------

/// All and only in-video pairs at index distance `horizon`, ordered by
/// video then segment index.
inline std::vector<PairSample> pair_segments(const Dataset& ds, int horizon) {
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    std::vector<PairSample> pairs;
    std::size_t begin = 0;
    while (begin < ds.segments.size()) {
        std::size_t end = begin;
        while (end < ds.segments.size() &&
               ds.segments[end].video_id == ds.segments[begin].video_id)
            ++end;
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = i + 1; j < end; ++j) {
                int gap = ds.segments[j].segment_index - ds.segments[i].segment_index;
                if (gap == horizon) {
                    pairs.push_back({ds.segments[i], ds.segments[j], horizon});
                    break;
                }
                if (gap > horizon) break;
            }
        }
        begin = end;
    }
    return pairs;
}

/// Splits off the segments labeled with an excluded (action, object) pair.
/// The train side keeps every segment but strips the labels of excluded
/// ones, so their features remain available to the self-supervised
/// regression term; the heldout side is the labeled excluded segments.
inline std::pair<Dataset, Dataset> holdout_filter(
    const Dataset& ds, const std::set<std::pair<int, int>>& excluded) {
    for (const auto& [a, o] : excluded)
        if (a < 0 || a >= ds.num_actions || o < 0 || o >= ds.num_objects)
            throw ValidationError("excluded pair (" + std::to_string(a) + "," +
                                  std::to_string(o) + ") not in vocab");
    Dataset train = ds;
    Dataset heldout = ds;
    heldout.segments.clear();
    for (Segment& s : train.segments) {
        if (s.labeled() && excluded.count({s.action_id, s.object_id})) {
            heldout.segments.push_back(s);
            s.action_id = kUnlabeled;
            s.object_id = kUnlabeled;
        }
    }
    return {std::move(train), std::move(heldout)};
}

// ---------------------------------------------------------------------------
// Dataset file format
// ---------------------------------------------------------------------------
//
//   PREFACT1 <D> <A> <O>
//   act <id> <name>
//   obj <id> <name>
//   <video_id>\t<segment_index>\t<action|-1>\t<object|-1>\t<f1>\t...\t<fD>
//
// Floats are written with 17 significant digits so save/load round-trips
// exactly.

inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "PREFACT1 " << ds.dim << " " << ds.num_actions << " " << ds.num_objects << "\n";
    for (int a = 0; a < ds.num_actions; ++a)
        out << "act " << a << " "
            << (a < static_cast<int>(ds.action_names.size()) ? ds.action_names[a]
                                                             : "act" + std::to_string(a))
            << "\n";
    for (int o = 0; o < ds.num_objects; ++o)
        out << "obj " << o << " "
            << (o < static_cast<int>(ds.object_names.size()) ? ds.object_names[o]
                                                             : "obj" + std::to_string(o))
            << "\n";
    for (const Segment& s : ds.segments) {
        out << s.video_id << "\t" << s.segment_index << "\t" << s.action_id << "\t"
            << s.object_id;
        for (double f : s.features) out << "\t" << format_g17(f);
        out << "\n";
    }
    if (!out) throw FormatError("write failed for '" + path + "'");
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": " + msg);
    };

    if (!std::getline(in, line)) fail("empty file");
    ++line_no;
    Dataset ds;
    {
        std::istringstream h(line);
        std::string magic;
        if (!(h >> magic >> ds.dim >> ds.num_actions >> ds.num_objects) || magic != "PREFACT1")
            fail("bad header, expected 'PREFACT1 <D> <A> <O>'");
        if (ds.dim < 1 || ds.num_actions < 0 || ds.num_objects < 0) fail("bad header counts");
    }
    ds.action_names.resize(ds.num_actions);
    ds.object_names.resize(ds.num_objects);

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line.rfind("act ", 0) == 0 || line.rfind("obj ", 0) == 0) {
            std::string kind, name;
            int id;
            if (!(ls >> kind >> id >> name)) fail("bad vocab line");
            auto& table = kind == "act" ? ds.action_names : ds.object_names;
            if (id < 0 || id >= static_cast<int>(table.size())) fail("vocab id out of range");
            table[id] = name;
            continue;
        }
        Segment s;
        if (!(ls >> s.video_id >> s.segment_index >> s.action_id >> s.object_id))
            fail("bad segment prefix");
        s.features.reserve(ds.dim);
        double f;
        while (ls >> f) s.features.push_back(f);
        if (static_cast<int>(s.features.size()) != ds.dim)
            fail("expected " + std::to_string(ds.dim) + " features, got " +
                 std::to_string(s.features.size()));
        ds.segments.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

}  // namespace prefact
