#pragma once

// Command-line front end. Every subcommand produces one primary output
// (text, JSON or CSV) and, with --out, a manifest that `replay` can re-run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#if __has_include("json.hpp")
#include "json.hpp"
#else
#include <nlohmann/json.hpp>
#endif
#include "CLI11.hpp"

#include "incsub/analytics.hpp"
#include "incsub/counting.hpp"
#include "incsub/experiments.hpp"
#include "incsub/lis.hpp"
#include "incsub/measures.hpp"

namespace incsub::cli {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kBadArguments = 2 };

// ---------------------------------------------------------------------------
// Formatting and digests

inline std::string full_precision(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string short_precision(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << data;
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <typename T>
Json to_json_list(std::span<const T> values) {
    Json out = Json::array();
    for (const auto& v : values) out.push_back(v);
    return out;
}

// ---------------------------------------------------------------------------
// Output model

/// What a subcommand hands back; rendered according to --format.
struct Output {
    Json params = Json::object();
    Json results = Json::object();
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string text;
    std::vector<std::string> trial_log; // JSON lines
    std::vector<std::string> warnings;
};

struct Common {
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string format = "text";
    std::string out;
    std::string trial_log;
};

inline std::string render(const std::string& command, std::uint64_t seed, const Output& o, const std::string& format) {
    if (format == "json") {
        Json doc = Json::object();
        doc["command"] = command;
        doc["params"] = o.params;
        doc["seed"] = seed;
        doc["results"] = o.results;
        return doc.dump(2) + "\n";
    }
    if (format == "csv") {
        std::string s;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) s += ',';
                s += cells[i];
            }
            s += '\n';
        };
        line(o.header);
        for (const auto& row : o.rows) line(row);
        return s;
    }
    return o.text;
}

/// Row builder with full-precision numbers.
struct CsvRow {
    std::vector<std::string> cells;
    CsvRow& add(double x) {
        cells.push_back(full_precision(x));
        return *this;
    }
    CsvRow& add(std::uint64_t x) {
        cells.push_back(std::to_string(x));
        return *this;
    }
    CsvRow& add(const std::string& x) {
        const bool quote = x.find_first_of(",\"\n") != std::string::npos;
        if (!quote) {
            cells.push_back(x);
            return *this;
        }
        std::string q = "\"";
        for (char c : x) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        cells.push_back(q + "\"");
        return *this;
    }
    CsvRow& add(const char* x) { return add(std::string(x)); }
    CsvRow& add(bool x) { return add(std::string(x ? "true" : "false")); }
};

// ---------------------------------------------------------------------------
// Subcommands

namespace commands {

inline Output count(const std::string& perm, std::size_t k, const std::string& mode) {
    const Permutation p = Permutation::parse(perm);
    const CountMode m = mode == "extended" ? CountMode::extended : CountMode::exact;
    const CountValue z = count_increasing_subsequences(p, k, m);
    Output o;
    o.params = {{"perm", p.to_string()}, {"k", k}, {"mode", mode}};
    const double log2 = z.is_zero() ? -INFINITY : z.log2();
    const std::string value = z.to_string();
    const double approx = static_cast<double>(z.to_long_double());
    o.results = {{"n", p.size()}, {"k", k}, {"count", value}, {"approx", approx}};
    o.results["log2"] = z.is_zero() ? Json(nullptr) : Json(log2);
    o.header = {"n", "k", "mode", "count", "approx"};
    o.rows.push_back(CsvRow{}.add(std::uint64_t(p.size())).add(std::uint64_t(k)).add(mode).add(value).add(approx).cells);
    o.text = m == CountMode::exact ? value + "\n" : value + " (~" + short_precision(approx) + ")\n";
    return o;
}

inline Permutation draw(const std::string& measure, std::size_t n, std::size_t k, const std::vector<Value>& values,
                        RngStream& rng) {
    if (measure == "uniform") return sample_uniform_permutation(n, rng);
    if (measure == "mu") return sample_mu(AdulterationSpec(n, k), rng);
    return sample_conditioned(n, values, rng);
}

inline Output sample(std::size_t n, std::size_t k, const std::string& measure, const std::vector<Value>& values,
                     std::uint64_t trials, const Common& c) {
    if (trials < 1) throw std::invalid_argument("sample: --trials must be at least 1");
    if (measure == "mu") (void)AdulterationSpec(n, k);
    Output o;
    o.params = {{"n", n}, {"measure", measure}, {"trials", trials}};
    if (measure == "mu") o.params["k"] = k;
    if (measure == "conditioned") o.params["values"] = to_json_list<Value>(values);
    std::vector<Permutation> perms(trials, Permutation::identity(1));
    parallel_for(trials, c.threads, [&](std::size_t i) {
        RngStream rng(c.seed, i);
        perms[i] = draw(measure, n, k, values, rng);
    });
    Json list = Json::array();
    o.header = {"trial", "permutation", "lis"};
    for (std::uint64_t i = 0; i < trials; ++i) {
        const auto lis = lis_length(perms[i]);
        list.push_back({{"trial", i}, {"permutation", to_json_list<Value>(perms[i].image())}, {"lis", lis}});
        o.rows.push_back(CsvRow{}.add(i).add(perms[i].to_string()).add(std::uint64_t(lis)).cells);
        o.text += perms[i].to_string() + "\n";
    }
    o.results = {{"samples", list}};
    return o;
}

inline Output lis(const std::string& perm, std::size_t n, std::size_t k, const std::string& measure,
                  std::uint64_t trials, const Common& c) {
    Output o;
    if (!perm.empty()) {
        const Permutation p = Permutation::parse(perm);
        const auto len = lis_length(p);
        o.params = {{"perm", p.to_string()}};
        o.results = {{"n", p.size()}, {"lis", len}};
        o.header = {"n", "lis"};
        o.rows.push_back(CsvRow{}.add(std::uint64_t(p.size())).add(std::uint64_t(len)).cells);
        o.text = std::to_string(len) + "\n";
        return o;
    }
    if (n == 0) throw std::invalid_argument("lis: give --perm or --n");
    if (trials < 1) throw std::invalid_argument("lis: --trials must be at least 1");
    if (measure == "mu") (void)AdulterationSpec(n, k);
    o.params = {{"n", n}, {"measure", measure}, {"trials", trials}};
    if (measure == "mu") o.params["k"] = k;
    std::vector<std::size_t> lengths(trials);
    parallel_for(trials, c.threads, [&](std::size_t i) {
        RngStream rng(c.seed, i);
        lengths[i] = lis_length(draw(measure, n, k, {}, rng));
    });
    const auto summary = summarize_lengths(lengths);
    o.results = {{"mean", summary.mean.mean}, {"stderr", summary.mean.std_error}, {"min", summary.min},
                 {"max", summary.max},       {"median", summary.q50},            {"lengths", lengths}};
    o.header = {"trial", "lis"};
    for (std::uint64_t i = 0; i < trials; ++i) o.rows.push_back(CsvRow{}.add(i).add(std::uint64_t(lengths[i])).cells);
    o.text = "mean " + short_precision(summary.mean.mean) + " +- " + short_precision(summary.mean.std_error) +
             " (min " + std::to_string(summary.min) + ", median " + short_precision(summary.q50) + ", max " +
             std::to_string(summary.max) + ")\n";
    return o;
}

inline Json tv_json(const TvEstimate& tv) {
    Json j = {{"tv", tv.value}, {"method", to_string(tv.method)}, {"stderr", tv.std_error}, {"trials", tv.trials}};
    if (tv.exact) j["exact"] = tv.exact->get_str();
    if (tv.method == TvMethod::monte_carlo) {
        j["ci_low"] = tv.ci_low;
        j["ci_high"] = tv.ci_high;
    }
    return j;
}

inline Output tv_exact(std::size_t n, std::size_t k, std::size_t budget, const Common& c) {
    const auto tv = exact_tv_distance(AdulterationSpec(n, k), {budget, c.threads});
    Output o;
    o.params = {{"n", n}, {"k", k}, {"enum_budget", budget}};
    o.results = tv_json(tv);
    o.header = {"n", "k", "tv", "exact", "method"};
    o.rows.push_back(
        CsvRow{}.add(std::uint64_t(n)).add(std::uint64_t(k)).add(tv.value).add(tv.exact->get_str()).add(to_string(tv.method)).cells);
    o.text = "tv " + short_precision(tv.value) + " = " + tv.exact->get_str() + "\n";
    return o;
}

inline Output tv_mc(std::size_t n, std::size_t k, std::uint64_t trials, const Common& c) {
    const auto tv = tv_monte_carlo(AdulterationSpec(n, k), trials, c.seed, c.threads);
    Output o;
    o.params = {{"n", n}, {"k", k}, {"trials", trials}};
    o.results = tv_json(tv);
    o.header = {"n", "k", "tv", "stderr", "ci_low", "ci_high", "trials"};
    o.rows.push_back(CsvRow{}
                         .add(std::uint64_t(n))
                         .add(std::uint64_t(k))
                         .add(tv.value)
                         .add(tv.std_error)
                         .add(tv.ci_low)
                         .add(tv.ci_high)
                         .add(trials)
                         .cells);
    o.text = "tv " + short_precision(tv.value) + " +- " + short_precision(tv.std_error) + " (95% CI " +
             short_precision(tv.ci_low) + " .. " + short_precision(tv.ci_high) + ")\n";
    return o;
}

inline Output tv_sweep_cmd(const std::vector<std::size_t>& ns, double cconst, const std::vector<double>& ls,
                           std::uint64_t trials, std::size_t budget, bool cross_check, const Common& c) {
    TvSweepConfig config;
    config.cells = tv_cells_from_rule(ns, cconst, ls);
    config.mc_trials = trials;
    config.enumeration_budget = budget;
    config.cross_check = cross_check;
    config.master_seed = c.seed;
    config.threads = c.threads;
    const auto rows = tv_sweep(config);
    Output o;
    o.params = {{"ns", ns}, {"c", cconst}, {"ls", ls}, {"trials", trials}, {"enum_budget", budget},
                {"cross_check", cross_check}};
    Json list = Json::array();
    o.header = {"n", "k", "exponent", "tv_exact", "tv_mc", "mc_stderr"};
    for (const auto& r : rows) {
        Json j = {{"n", r.n}, {"k", r.k}, {"exponent", r.exponent}};
        j["exact"] = r.exact ? tv_json(*r.exact) : Json(nullptr);
        j["monte_carlo"] = r.monte_carlo ? tv_json(*r.monte_carlo) : Json(nullptr);
        list.push_back(j);
        CsvRow row;
        row.add(std::uint64_t(r.n)).add(std::uint64_t(r.k)).add(r.exponent);
        if (r.exact) row.add(r.exact->value); else row.add("");
        if (r.monte_carlo) row.add(r.monte_carlo->value).add(r.monte_carlo->std_error); else row.add("").add("");
        o.rows.push_back(row.cells);
        o.text += "n " + std::to_string(r.n) + " k " + std::to_string(r.k);
        if (r.exact) o.text += "  exact " + short_precision(r.exact->value);
        if (r.monte_carlo)
            o.text += "  mc " + short_precision(r.monte_carlo->value) + " +- " + short_precision(r.monte_carlo->std_error);
        o.text += "\n";
    }
    o.results = {{"cells", list}};
    return o;
}

inline std::string flags_string(const std::vector<std::uint8_t>& flags) {
    std::string s;
    for (auto f : flags) s += f ? '1' : '0';
    return s;
}

inline Json card_json(const CardExperimentResult& r) {
    return {{"s", r.s},
            {"k", r.k},
            {"X", to_json_list<Value>(r.X.members())},
            {"Y", to_json_list<Value>(r.Y.members())},
            {"z", flags_string(r.z_flags)},
            {"T", r.T},
            {"That", r.That},
            {"row", to_json_list<Value>(r.row.image())},
            {"verified_lis", r.verified_lis}};
}

inline Output card_exp(std::size_t s, std::size_t k, std::uint64_t trials, const Common& c) {
    if (trials < 1) throw std::invalid_argument("card-exp: --trials must be at least 1");
    if (s + k == 0) throw std::invalid_argument("card-exp: s + k must be at least 1");
    constexpr std::uint64_t kInlineRecords = 100;
    Output o;
    o.params = {{"s", s}, {"k", k}, {"trials", trials}};
    std::vector<double> T, That;
    T.reserve(trials);
    That.reserve(trials);
    std::uint64_t verified = 0;
    std::size_t min_slack = SIZE_MAX;
    Json records = Json::array();
    o.header = {"trial", "T", "That", "verified_lis", "s_plus_T"};
    for_each_card_trial(s, k, trials, c.seed, c.threads, [&](std::uint64_t i, const CardExperimentResult& r) {
        T.push_back(double(r.T));
        That.push_back(double(r.That));
        verified += r.verified_lis >= s + r.T;
        min_slack = std::min(min_slack, r.verified_lis - (s + r.T));
        if (trials <= kInlineRecords) records.push_back(card_json(r));
        if (!c.trial_log.empty())
            o.trial_log.push_back(Json({{"trial", i}, {"seed_stream", i}, {"payload", card_json(r)}}).dump());
        o.rows.push_back(
            CsvRow{}.add(i).add(std::uint64_t(r.T)).add(std::uint64_t(r.That)).add(std::uint64_t(r.verified_lis)).add(std::uint64_t(s + r.T)).cells);
    });
    const auto mt = estimate_mean(T), mh = estimate_mean(That);
    o.results = {{"N", s + k},
                 {"trials", trials},
                 {"mean_T", mt.mean},
                 {"stderr_T", mt.std_error},
                 {"mean_That", mh.mean},
                 {"stderr_That", mh.std_error},
                 {"verified", verified},
                 {"all_verified", verified == trials},
                 {"min_lis_slack", min_slack},
                 {"records", records}};
    o.text = "trials " + std::to_string(trials) + ", N " + std::to_string(s + k) + "\nmean T " +
             short_precision(mt.mean) + " +- " + short_precision(mt.std_error) + "\nmean T-hat " +
             short_precision(mh.mean) + " +- " + short_precision(mh.std_error) + "\nverified_lis >= s + T in " +
             std::to_string(verified) + "/" + std::to_string(trials) + " trials\n";
    if (that_window(k).empty()) o.warnings.push_back("T-hat window is empty for k < 8; T-hat is 0");
    return o;
}

inline Output that_moments(std::size_t s, std::size_t k, std::uint64_t trials, double exact_budget, bool verify,
                           const Common& c) {
    const std::size_t N = s + k;
    const auto m = estimate_That_moments(s, k, trials, c.seed, c.threads, verify);
    const double exact_mean = exact_expected_That(N, k);
    const bool second_feasible = second_moment_work(N, k) <= exact_budget;
    Output o;
    o.params = {{"s", s}, {"k", k}, {"trials", trials}, {"exact_budget", exact_budget}, {"verify_lis", verify}};
    o.results = {{"N", N},
                 {"mean", m.mean},
                 {"mean_stderr", m.mean_stderr},
                 {"second_moment", m.second_moment},
                 {"second_stderr", m.second_stderr},
                 {"exact_mean", exact_mean}};
    if (second_feasible)
        o.results["exact_second_moment"] = exact_second_moment_That(N, k);
    else
        o.results["exact_second_moment"] = nullptr;
    const RankWindow w = that_window(k);
    o.results["window"] = w.empty() ? Json(nullptr) : Json::array({w.first, w.last});
    o.header = {"N", "k", "mean", "mean_stderr", "exact_mean", "second_moment", "second_stderr", "exact_second_moment"};
    CsvRow row;
    row.add(std::uint64_t(N)).add(std::uint64_t(k)).add(m.mean).add(m.mean_stderr).add(exact_mean)
        .add(m.second_moment).add(m.second_stderr);
    if (second_feasible) row.add(o.results["exact_second_moment"].get<double>()); else row.add("");
    o.rows.push_back(row.cells);
    o.text = "E T-hat   mc " + short_precision(m.mean) + " +- " + short_precision(m.mean_stderr) + "  exact " +
             short_precision(exact_mean) + "\nE T-hat^2 mc " + short_precision(m.second_moment) + " +- " +
             short_precision(m.second_stderr);
    o.text += second_feasible ? "  exact " + short_precision(o.results["exact_second_moment"].get<double>()) + "\n"
                              : "  exact (over budget)\n";
    if (w.empty()) o.warnings.push_back("T-hat window is empty for k < 8; T-hat is 0");
    return o;
}

inline Output scaling(const std::vector<std::size_t>& Ns, const std::vector<double>& lambdas, std::uint64_t trials,
                      double exact_budget, const Common& c) {
    ScalingConfig config{Ns, lambdas, trials, exact_budget, c.seed, c.threads};
    const auto table = scaling_study(config);
    Output o;
    o.params = {{"ns", Ns}, {"lambdas", lambdas}, {"trials", trials}, {"exact_budget", exact_budget}};
    Json rows = Json::array();
    o.header = {"N", "lambda", "k", "E_That", "that_ratio", "E_That2", "E_That2_stderr", "second_exact", "second_ratio"};
    for (const auto& r : table.rows) {
        rows.push_back({{"N", r.N},
                        {"lambda", r.lambda},
                        {"k", r.k},
                        {"expected_That", r.expected_That},
                        {"that_ratio", r.that_ratio},
                        {"second_moment", r.second_moment},
                        {"second_stderr", r.second_stderr},
                        {"second_exact", r.second_exact},
                        {"second_ratio", r.second_ratio},
                        {"below_threshold", r.below_threshold}});
        o.rows.push_back(CsvRow{}
                             .add(std::uint64_t(r.N))
                             .add(r.lambda)
                             .add(std::uint64_t(r.k))
                             .add(r.expected_That)
                             .add(r.that_ratio)
                             .add(r.second_moment)
                             .add(r.second_stderr)
                             .add(r.second_exact)
                             .add(r.second_ratio)
                             .cells);
        o.text += "N " + std::to_string(r.N) + " lambda " + short_precision(r.lambda) + " k " + std::to_string(r.k) +
                  "  E T-hat " + short_precision(r.expected_That) + " ratio " + short_precision(r.that_ratio) +
                  "  E T-hat^2 " + short_precision(r.second_moment) + (r.second_exact ? " (exact)" : " (mc)") +
                  " ratio " + short_precision(r.second_ratio) + "\n";
    }
    Json slopes = Json::array();
    for (const auto& s : table.slopes) slopes.push_back({{"N", s.N}, {"slope", s.slope}, {"points", s.points}});
    o.results = {{"rows", rows},
                 {"slopes", slopes},
                 {"min_that_ratio", table.min_that_ratio},
                 {"max_that_ratio", table.max_that_ratio},
                 {"recorded_constant", table.recorded_constant}};
    o.text += "that ratio range " + short_precision(table.min_that_ratio) + " .. " +
              short_precision(table.max_that_ratio) + ", recorded constant " +
              short_precision(table.recorded_constant) + "\n";
    return o;
}

inline Json summary_json(const LisSummary& s) {
    return {{"mean", s.mean.mean}, {"stderr", s.mean.std_error}, {"min", s.min}, {"q05", s.q05}, {"q25", s.q25},
            {"q50", s.q50},        {"q75", s.q75},               {"q95", s.q95}, {"max", s.max}};
}

inline Output lis_shift(std::size_t n, std::size_t k, std::uint64_t trials, const std::vector<double>& cs,
                        const Common& c) {
    const auto r = lis_shift_experiment(n, k, trials, c.seed, cs, c.threads);
    Output o;
    o.params = {{"n", n}, {"k", k}, {"trials", trials}, {"cs", cs}};
    Json ex = Json::array();
    o.header = {"c", "threshold", "freq_uniform", "freq_mu"};
    for (const auto& e : r.exceedance) {
        ex.push_back({{"c", e.c}, {"threshold", e.threshold}, {"freq_uniform", e.freq_uniform}, {"freq_mu", e.freq_mu}});
        o.rows.push_back(CsvRow{}.add(e.c).add(e.threshold).add(e.freq_uniform).add(e.freq_mu).cells);
    }
    o.results = {{"uniform", summary_json(r.uniform)},
                 {"mu", summary_json(r.mu)},
                 {"exceedance", ex},
                 {"classifier_error", r.classifier_error},
                 {"mu_all_at_least_k", r.mu_all_at_least_k}};
    o.text = "L_n under U: mean " + short_precision(r.uniform.mean.mean) + " +- " +
             short_precision(r.uniform.mean.std_error) + "\nL_n under mu: mean " + short_precision(r.mu.mean.mean) +
             " +- " + short_precision(r.mu.mean.std_error) + "\nclassifier error (L_n >= k) " +
             short_precision(r.classifier_error) + "\n";
    for (const auto& e : r.exceedance)
        o.text += "c " + short_precision(e.c) + " threshold " + short_precision(e.threshold) + ": U " +
                  short_precision(e.freq_uniform) + ", mu " + short_precision(e.freq_mu) + "\n";
    return o;
}

inline Output complement_lis(std::size_t n, std::size_t k, std::uint64_t trials, const std::vector<double>& gammas,
                             const Common& c) {
    const auto r = complement_lis_check(n, k, trials, c.seed, gammas, c.threads);
    Output o;
    o.params = {{"n", n}, {"k", k}, {"trials", trials}, {"gammas", gammas}};
    Json rows = Json::array();
    o.header = {"gamma", "threshold", "frequency"};
    for (const auto& row : r.rows) {
        rows.push_back({{"gamma", row.gamma}, {"threshold", row.threshold}, {"frequency", row.frequency}});
        o.rows.push_back(CsvRow{}.add(row.gamma).add(row.threshold).add(row.frequency).cells);
        o.text += "gamma " + short_precision(row.gamma) + " threshold " + short_precision(row.threshold) +
                  ": frequency " + short_precision(row.frequency) + "\n";
    }
    o.results = {{"complement_mean", r.complement_mean.mean},
                 {"complement_stderr", r.complement_mean.std_error},
                 {"monotonicity_violations", r.monotonicity_violations},
                 {"rows", rows}};
    return o;
}

inline Output zero_sweep(std::size_t n, const std::vector<double>& cs, std::uint64_t trials, const Common& c) {
    const auto sweep = zero_probability_sweep(n, cs, trials, c.seed, c.threads);
    Output o;
    o.params = {{"n", n}, {"cs", cs}, {"trials", trials}};
    Json rows = Json::array();
    o.header = {"c", "k", "p_zero", "stderr"};
    for (const auto& r : sweep.rows) {
        rows.push_back({{"c", r.c}, {"k", r.k}, {"p_zero", r.p_zero}, {"stderr", r.std_error}});
        o.rows.push_back(CsvRow{}.add(r.c).add(std::uint64_t(r.k)).add(r.p_zero).add(r.std_error).cells);
        o.text += "c " + short_precision(r.c) + " k " + std::to_string(r.k) + ": P(Z = 0) " +
                  short_precision(r.p_zero) + " +- " + short_precision(r.std_error) + "\n";
    }
    o.results = {{"rows", rows}};
    return o;
}

inline Output pmf(std::size_t N, std::size_t k, std::size_t j, bool exact) {
    const auto law = insertion_position_pmf(N, k, j);
    const auto check = pmf_bound_check(N, k, j);
    std::vector<mpq_class> rational;
    if (exact) rational = insertion_position_pmf_exact(N, k, j);
    Output o;
    o.params = {{"N", N}, {"k", k}, {"j", j}, {"exact", exact}};
    Json rows = Json::array();
    o.header = exact ? std::vector<std::string>{"r", "p", "exact"} : std::vector<std::string>{"r", "p"};
    for (std::size_t r = law.first(); r <= law.last(); ++r) {
        const double p = law.at(r);
        Json row = {{"r", r}, {"p", p}};
        CsvRow csv;
        csv.add(std::uint64_t(r)).add(p);
        if (exact) {
            row["exact"] = rational[r - law.first()].get_str();
            csv.add(rational[r - law.first()].get_str());
        }
        rows.push_back(row);
        o.rows.push_back(csv.cells);
        o.text += std::to_string(r) + " " + full_precision(p) + (exact ? " " + rational[r - law.first()].get_str() : "") + "\n";
    }
    o.results = {{"argmax", check.argmax_r}, {"max_pmf", check.max_pmf}, {"bound_ratio", check.bound_ratio}, {"pmf", rows}};
    o.text += "argmax " + std::to_string(check.argmax_r) + " max " + short_precision(check.max_pmf) + " bound ratio " +
              short_precision(check.bound_ratio) + "\n";
    return o;
}

inline Output pmf_scan(const std::vector<std::size_t>& Ns, const std::vector<std::size_t>& ks) {
    const auto scan = pmf_bound_scan(Ns, ks);
    Output o;
    o.params = {{"ns", Ns}, {"ks", ks}};
    o.results = {{"max_ratio", scan.max_ratio}, {"worst_N", scan.worst_N}, {"worst_k", scan.worst_k},
                 {"worst_j", scan.worst_j},     {"cells", scan.cells}};
    o.header = {"max_ratio", "worst_N", "worst_k", "worst_j", "cells"};
    o.rows.push_back(CsvRow{}.add(scan.max_ratio).add(std::uint64_t(scan.worst_N)).add(std::uint64_t(scan.worst_k))
                         .add(std::uint64_t(scan.worst_j)).add(scan.cells).cells);
    o.text = "max bound ratio " + short_precision(scan.max_ratio) + " at N " + std::to_string(scan.worst_N) + " k " +
             std::to_string(scan.worst_k) + " j " + std::to_string(scan.worst_j) + " over " +
             std::to_string(scan.cells) + " cells\n";
    return o;
}

inline Output lemma5(double a, double b, double c, double d) {
    const double ratio = lemma5_ratio(a, b, c, d);
    const double balance = b * c / a;
    Output o;
    o.params = {{"a", a}, {"b", b}, {"c", c}, {"d", d}};
    o.results = {{"ratio", ratio},
                 {"F_ab", entropy_F(a, b)},
                 {"F_cd", entropy_F(c, d)},
                 {"F_sum", entropy_F(a + c, b + d)},
                 {"G_at_d", entropy_gap_G(a, b, c, d)},
                 {"balance_point", balance}};
    o.header = {"a", "b", "c", "d", "ratio", "G_at_d", "balance_point"};
    o.rows.push_back(CsvRow{}.add(a).add(b).add(c).add(d).add(ratio).add(entropy_gap_G(a, b, c, d)).add(balance).cells);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", ratio);
    o.text = "ratio " + (ratio == 1.0 ? std::string(buf) : full_precision(ratio)) + "\n";
    return o;
}

inline Output asymptotics(double n, double cconst, double l, double k_given) {
    Output o;
    o.params = {{"n", n}};
    const bool by_k = k_given >= 0.0;
    const double k = by_k ? k_given : cconst * std::pow(n, l);
    if (by_k)
        o.params["k"] = k_given;
    else {
        o.params["c"] = cconst;
        o.params["l"] = l;
    }
    const LogValue exact = expected_Z_log(n, k);
    o.results = {{"k", k}, {"log_EZ", exact.log()}, {"log10_EZ", exact.log10()}};
    o.header = {"n", "k", "log_EZ", "log_asymptotic", "ratio"};
    CsvRow row;
    row.add(n).add(k).add(exact.log());
    o.text = "log E Z " + short_precision(exact.log());
    if (!by_k && l > 0.0 && l <= 0.5) {
        const LogValue asym = expected_Z_asymptotic(n, cconst, l);
        o.results["log_asymptotic"] = asym.log();
        o.results["ratio"] = std::exp(exact.log() - asym.log());
        row.add(asym.log()).add(std::exp(exact.log() - asym.log()));
        o.text += "  asymptotic " + short_precision(asym.log()) + "  ratio " +
                  short_precision(std::exp(exact.log() - asym.log()));
    } else {
        o.results["log_asymptotic"] = nullptr;
        o.results["ratio"] = nullptr;
        row.add("").add("");
    }
    o.text += "\n";
    const double kf = std::floor(k);
    if (by_k && kf == k && n == std::floor(n) && n <= 2000) {
        const auto q = expected_Z_exact(std::size_t(n), std::size_t(k));
        o.results["exact"] = q.get_str();
        o.text += "E Z = " + q.get_str() + "\n";
    }
    o.rows.push_back(row.cells);
    return o;
}

} // namespace commands

// ---------------------------------------------------------------------------
// Manifest and dispatch

struct DispatchStreams {
    std::ostream& out;
    std::ostream& err;
};

inline int dispatch(const std::vector<std::string>& args, DispatchStreams io);

namespace detail {

inline std::vector<std::string> strip_flags(const std::vector<std::string>& args, const std::vector<std::string>& flags) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        bool drop = false;
        for (const auto& f : flags) {
            if (args[i] == f) {
                drop = true;
                ++i; // skip the value
                break;
            }
            if (args[i].rfind(f + "=", 0) == 0) {
                drop = true;
                break;
            }
        }
        if (!drop) out.push_back(args[i]);
    }
    return out;
}

inline int replay(const std::string& manifest_path, const std::string& threads, const std::string& out_path,
                  DispatchStreams io) {
    const Json manifest = Json::parse(read_file(manifest_path));
    std::vector<std::string> args = manifest.at("argv").get<std::vector<std::string>>();
    args = strip_flags(args, {"--threads", "--out", "--trial-log"});
    const std::string out = out_path.empty() ? manifest.at("outputs").at("primary").at("path").get<std::string>() + ".replay"
                                             : out_path;
    args.push_back("--out");
    args.push_back(out);
    std::string log_path;
    if (manifest.at("outputs").contains("trial_log")) {
        log_path = out + ".trials.jsonl";
        args.push_back("--trial-log");
        args.push_back(log_path);
    }
    if (!threads.empty()) {
        args.push_back("--threads");
        args.push_back(threads);
    }
    std::ostringstream sink;
    const int code = dispatch(args, {sink, io.err});
    if (code != kOk) return code;
    bool match = sha256_hex(read_file(out)) == manifest["outputs"]["primary"]["sha256"].get<std::string>();
    if (!log_path.empty())
        match = match && sha256_hex(read_file(log_path)) == manifest["outputs"]["trial_log"]["sha256"].get<std::string>();
    io.out << (match ? "match" : "MISMATCH") << " " << out << "\n";
    return match ? kOk : kRuntimeFailure;
}

} // namespace detail

/// Runs one subcommand. `args` excludes the program name.
inline int dispatch(const std::vector<std::string>& args, DispatchStreams io) {
    CLI::App app{"Increasing subsequences of random permutations: counts, measures and experiments", "incsub"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common common;
    std::function<Output()> action;
    std::string command;
    std::string replay_manifest, replay_threads;

    auto add_common = [&](CLI::App* sub, bool seeded) {
        if (seeded) sub->add_option("--seed", common.seed, "master seed (64-bit)");
        sub->add_option("--threads", common.threads, "worker threads (0 = all available)");
        sub->add_option("--format", common.format, "output format")->check(CLI::IsMember({"json", "csv", "text"}));
        sub->add_option("--out", common.out, "write output here and a manifest next to it");
    };

    // Values shared by several subcommands.
    std::size_t n = 0, k = 0, s = 0, j = 0;
    std::uint64_t trials = 0;
    double cconst = 1.0, l = 0.5, a = 0, b = 0, d = 0, nreal = 0, kreal = -1.0, exact_budget = 2e9;
    std::size_t enum_budget = 10;
    std::string perm, mode = "exact", measure = "uniform";
    std::vector<Value> values;
    std::vector<std::size_t> ns, ks;
    std::vector<double> list_a, list_b;
    bool flag = false, no_verify = false;

    auto* count = app.add_subcommand("count", "count increasing subsequences of length k");
    count->add_option("--perm", perm, "permutation in one-line notation, e.g. 1,3,4,5,2")->required();
    count->add_option("--k", k, "subsequence length")->required();
    count->add_option("--mode", mode, "exact or extended")->check(CLI::IsMember({"exact", "extended"}));
    add_common(count, false);
    count->callback([&] { action = [&] { return commands::count(perm, k, mode); }; });

    auto* lis = app.add_subcommand("lis", "longest increasing subsequence of a given or sampled permutation");
    lis->add_option("--perm", perm, "permutation in one-line notation");
    lis->add_option("--n", n, "size of sampled permutations");
    lis->add_option("--k", k, "inserted run length for --measure mu");
    lis->add_option("--measure", measure, "uniform or mu")->check(CLI::IsMember({"uniform", "mu"}));
    lis->add_option("--trials", trials, "number of samples")->default_val(1);
    add_common(lis, true);
    lis->callback([&] { action = [&] { return commands::lis(perm, n, k, measure, trials, common); }; });

    auto* sample = app.add_subcommand("sample", "draw permutations from U_n, mu_{n;k} or U_{n;x}");
    sample->add_option("--n", n, "permutation size")->required();
    sample->add_option("--k", k, "inserted run length for --measure mu");
    sample->add_option("--measure", measure, "uniform, mu or conditioned")
        ->check(CLI::IsMember({"uniform", "mu", "conditioned"}));
    sample->add_option("--values", values, "increasing value set x for --measure conditioned")->delimiter(',');
    sample->add_option("--trials", trials, "number of samples")->default_val(1);
    add_common(sample, true);
    sample->callback([&] { action = [&] { return commands::sample(n, k, measure, values, trials, common); }; });

    auto* tve = app.add_subcommand("tv-exact", "exact total variation between mu_{n;k} and U_n");
    tve->add_option("--n", n)->required();
    tve->add_option("--k", k)->required();
    tve->add_option("--enum-budget", enum_budget, "largest n to enumerate");
    add_common(tve, false);
    tve->callback([&] { action = [&] { return commands::tv_exact(n, k, enum_budget, common); }; });

    auto* tvm = app.add_subcommand("tv-mc", "Monte Carlo total variation estimate");
    tvm->add_option("--n", n)->required();
    tvm->add_option("--k", k)->required();
    tvm->add_option("--trials", trials)->default_val(10000);
    add_common(tvm, true);
    tvm->callback([&] { action = [&] { return commands::tv_mc(n, k, trials, common); }; });

    auto* tvs = app.add_subcommand("tv-sweep", "total variation over cells (n, floor(c n^l))");
    tvs->add_option("--ns", ns)->required()->delimiter(',');
    tvs->add_option("--c", cconst)->default_val(1.0);
    tvs->add_option("--ls", list_a)->required()->delimiter(',');
    tvs->add_option("--trials", trials)->default_val(10000);
    tvs->add_option("--enum-budget", enum_budget);
    tvs->add_flag("--cross-check", flag, "also run Monte Carlo on enumerated cells");
    add_common(tvs, true);
    tvs->callback([&] {
        action = [&] { return commands::tv_sweep_cmd(ns, cconst, list_a, trials, enum_budget, flag, common); };
    });

    auto* card = app.add_subcommand("card-exp", "two-row card experiment");
    card->add_option("--s", s)->required();
    card->add_option("--k", k)->required();
    card->add_option("--trials", trials)->default_val(1);
    card->add_option("--trial-log", common.trial_log, "JSON-lines file with one record per trial");
    add_common(card, true);
    card->callback([&] { action = [&] { return commands::card_exp(s, k, trials, common); }; });

    auto* tm = app.add_subcommand("that-moments", "Monte Carlo and exact moments of T-hat");
    tm->add_option("--s", s)->required();
    tm->add_option("--k", k)->required();
    tm->add_option("--trials", trials)->default_val(10000);
    tm->add_option("--exact-budget", exact_budget, "step budget for the exact second moment");
    tm->add_flag("--no-verify", no_verify, "skip row construction and the LIS check");
    add_common(tm, true);
    tm->callback([&] { action = [&] { return commands::that_moments(s, k, trials, exact_budget, !no_verify, common); }; });

    auto* sc = app.add_subcommand("scaling", "E T-hat and E T-hat^2 against k = floor(N^lambda)");
    sc->add_option("--ns", ns)->delimiter(',')->default_str("1000,10000,100000");
    sc->add_option("--lambdas", list_a)->delimiter(',')->default_str("0.8");
    sc->add_option("--trials", trials, "Monte Carlo trials when the exact second moment is over budget")
        ->default_val(10000);
    sc->add_option("--exact-budget", exact_budget);
    add_common(sc, true);
    sc->callback([&] {
        if (ns.empty()) ns = {1000, 10000, 100000};
        if (list_a.empty()) list_a = {0.8};
        action = [&] { return commands::scaling(ns, list_a, trials, exact_budget, common); };
    });

    auto* ls = app.add_subcommand("lis-shift", "L_n under U_n against mu_{n;k}");
    ls->add_option("--n", n)->required();
    ls->add_option("--k", k, "inserted run length (default floor(c n^l))");
    ls->add_option("--c", cconst)->default_val(2.5);
    ls->add_option("--l", l)->default_val(0.5);
    ls->add_option("--trials", trials)->default_val(1000);
    ls->add_option("--cs", list_b, "threshold constants c in 2 sqrt(n) + c n^(1/6)")->delimiter(',');
    add_common(ls, true);
    ls->callback([&] {
        if (ls->count("--k") == 0) k = std::min(n, k_from_rule(double(n), cconst, l));
        if (list_b.empty()) list_b = {-2, -1, 0, 1, 2};
        action = [&] { return commands::lis_shift(n, k, trials, list_b, common); };
    });

    auto* cl = app.add_subcommand("complement-lis", "LIS over complement values under U_{n;x}");
    cl->add_option("--n", n)->required();
    cl->add_option("--k", k)->required();
    cl->add_option("--trials", trials)->default_val(500);
    cl->add_option("--gammas", list_b, "gamma values in 2 r^(1/2) - gamma r^(1/6)")->delimiter(',');
    add_common(cl, true);
    cl->callback([&] {
        if (list_b.empty()) list_b = {0, 1, 2, 3};
        action = [&] { return commands::complement_lis(n, k, trials, list_b, common); };
    });

    auto* zs = app.add_subcommand("zero-sweep", "P(Z_{n, floor(c sqrt n)} = 0)");
    zs->add_option("--n", n)->required();
    zs->add_option("--cs", list_b)->delimiter(',');
    zs->add_option("--trials", trials)->default_val(1000);
    add_common(zs, true);
    zs->callback([&] {
        if (list_b.empty()) list_b = {1.5, 2.0, 2.5};
        action = [&] { return commands::zero_sweep(n, list_b, trials, common); };
    });

    auto* pm = app.add_subcommand("pmf", "law of the j-th smallest element of a uniform k-subset");
    pm->add_option("--n", n, "N");
    pm->add_option("--k", k);
    pm->add_option("--j", j);
    pm->add_flag("--exact", flag, "also print rational probabilities");
    pm->add_option("--ns", ns, "scan the bound over these N (with --ks)")->delimiter(',');
    pm->add_option("--ks", ks)->delimiter(',');
    add_common(pm, false);
    pm->callback([&] {
        if (!ns.empty() || !ks.empty())
            action = [&] { return commands::pmf_scan(ns, ks); };
        else
            action = [&] { return commands::pmf(n, k, j, flag); };
    });

    auto* l5 = app.add_subcommand("lemma5", "entropy ratio for positive a, b, c, d");
    l5->add_option("--a", a)->required();
    l5->add_option("--b", b)->required();
    l5->add_option("--c", cconst)->required();
    l5->add_option("--d", d)->required();
    add_common(l5, false);
    l5->callback([&] { action = [&] { return commands::lemma5(a, b, cconst, d); }; });

    auto* as = app.add_subcommand("asymptotics", "E Z_{n,k} and its Stirling form for k = c n^l");
    as->add_option("--n", nreal, "n")->required();
    as->add_option("--c", cconst)->default_val(1.0);
    as->add_option("--l", l)->default_val(0.5);
    as->add_option("--k", kreal, "explicit k instead of c n^l");
    add_common(as, false);
    as->callback([&] { action = [&] { return commands::asymptotics(nreal, cconst, l, kreal); }; });

    auto* rp = app.add_subcommand("replay", "re-run a manifest and compare output digests");
    rp->add_option("--manifest", replay_manifest)->required();
    rp->add_option("--threads", replay_threads);
    rp->add_option("--out", common.out);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        io.out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kOk;
    } catch (const CLI::CallForVersion&) {
        io.out << kVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        io.err << "error: " << e.what() << "\n";
        io.err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kBadArguments;
    }
    CLI::App* chosen = app.get_subcommands().front();
    command = chosen->get_name();

    if (command == "replay") {
        try {
            return detail::replay(replay_manifest, replay_threads, common.out, io);
        } catch (const std::exception& e) {
            io.err << "error: " << e.what() << "\n";
            return kRuntimeFailure;
        }
    }

    const std::string started = utc_timestamp();
    Output output;
    try {
        output = action();
    } catch (const CountOverflowError& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    } catch (const std::invalid_argument& e) {
        io.err << "error: " << e.what() << "\n" << chosen->help();
        return kBadArguments;
    } catch (const std::domain_error& e) {
        io.err << "error: " << e.what() << "\n" << chosen->help();
        return kBadArguments;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    for (const auto& w : output.warnings) io.err << "warning: " << w << "\n";

    try {
        const std::string primary = render(command, common.seed, output, common.format);
        if (common.out.empty()) {
            io.out << primary;
        } else {
            write_file(common.out, primary);
        }
        std::string log_text;
        if (!common.trial_log.empty()) {
            for (const auto& line : output.trial_log) log_text += line + "\n";
            write_file(common.trial_log, log_text);
        }
        if (!common.out.empty()) {
            Json manifest = Json::object();
            manifest["command"] = command;
            manifest["argv"] = args;
            manifest["params"] = output.params;
            manifest["seed"] = common.seed;
            manifest["format"] = common.format;
            manifest["version"] = kVersion;
            manifest["started"] = started;
            manifest["finished"] = utc_timestamp();
            manifest["outputs"]["primary"] = {{"path", common.out}, {"sha256", sha256_hex(primary)}};
            if (!common.trial_log.empty())
                manifest["outputs"]["trial_log"] = {{"path", common.trial_log}, {"sha256", sha256_hex(log_text)}};
            write_file(common.out + ".manifest.json", manifest.dump(2) + "\n");
        }
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kOk;
}

inline int dispatch(const std::vector<std::string>& args) { return dispatch(args, {std::cout, std::cerr}); }

inline int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

} // namespace incsub::cli
