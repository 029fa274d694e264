// JSON files: platform/workload parameters, stage specs, Markov
// artifacts and advisory reports.
//
//   params:  {"platform": {"P", "cc_uow", "rc_uow", "unit_cycles"},
//             "workload": {"cw_mean", "cw_dist", "pw_mean", "pw_dist"},
//             "seed": optional}
//   stages:  {"stages": [{"rc", "cw", "cc", "var"}, ...]}
//   mix:     {"mix": [{"weight", "stages": [...]}, ...]}
//
// A distribution is either a kind name ("constant", "exponential",
// "poisson") or {"kind": "uniform", "lo", "hi"}; its mean is the matching
// *_mean field.

#ifndef LFPERF_PARAMS_IO_HPP
#define LFPERF_PARAMS_IO_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "markov_model.hpp"
#include "model_core.hpp"
#include "multistage_model.hpp"

namespace lfperf::io {

using nlohmann::json;

namespace detail {

inline const json& member(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw validation_error(path, path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw validation_error(path + "." + key, "missing field " + path + "." + key);
    return *it;
}

inline double number(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = member(obj, key, path);
    if (!v.is_number()) throw validation_error(path + "." + key, path + "." + key + ": expected a number");
    return v.get<double>();
}

inline Distribution distribution(const json& v, double mean, const std::string& field) {
    if (v.is_string()) {
        const auto kind = v.get<std::string>();
        DistKind k;
        try {
            k = parse_dist_kind(kind);
        } catch (const validation_error& e) {
            throw validation_error(field, field + ": " + e.what());
        }
        if (k == DistKind::UniformRange)
            throw validation_error(field, field + ": uniform needs {\"kind\", \"lo\", \"hi\"}");
        return {k, mean, 0, 0};
    }
    if (v.is_object()) {
        const auto& kind = member(v, "kind", field);
        if (!kind.is_string() || kind.get<std::string>() != "uniform")
            return distribution(kind, mean, field);
        return Distribution::uniform(number(v, "lo", field), number(v, "hi", field));
    }
    throw validation_error(field, field + ": expected a kind name or an object");
}

inline json distribution_json(const Distribution& d) {
    if (d.kind == DistKind::UniformRange) return {{"kind", "uniform"}, {"lo", d.lo}, {"hi", d.hi}};
    return std::string(to_string(d.kind));
}

inline json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw validation_error("json", std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace detail

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("file", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return detail::parse_text(ss.str());
}

struct ParamsFile {
    PlatformParams platform;
    WorkloadParams workload;
    std::optional<std::uint64_t> seed;
};

/// Parses and validates a params document; errors name the field.
inline ParamsFile params_from_json(const json& doc) {
    ParamsFile f;
    const auto& pl = detail::member(doc, "platform", "params");
    const double P = detail::number(pl, "P", "platform");
    if (P != static_cast<int>(P)) throw validation_error("platform.P", "platform.P: expected an integer");
    f.platform.P = static_cast<int>(P);
    f.platform.cc = detail::number(pl, "cc_uow", "platform");
    f.platform.rc = detail::number(pl, "rc_uow", "platform");
    if (pl.contains("unit_cycles")) f.platform.unit_cycles = detail::number(pl, "unit_cycles", "platform");

    const auto& wl = detail::member(doc, "workload", "params");
    f.workload.cw_mean = detail::number(wl, "cw_mean", "workload");
    f.workload.pw_mean = detail::number(wl, "pw_mean", "workload");
    f.workload.cw_dist = wl.contains("cw_dist")
                             ? detail::distribution(wl["cw_dist"], f.workload.cw_mean, "workload.cw_dist")
                             : Distribution::constant(f.workload.cw_mean);
    f.workload.pw_dist = wl.contains("pw_dist")
                             ? detail::distribution(wl["pw_dist"], f.workload.pw_mean, "workload.pw_dist")
                             : Distribution::exponential(f.workload.pw_mean);
    if (doc.contains("seed")) {
        const auto& s = doc["seed"];
        if (!s.is_number_unsigned()) throw validation_error("seed", "seed: expected a nonnegative integer");
        f.seed = s.get<std::uint64_t>();
    }
    try {
        validate(f.platform, f.workload);
    } catch (const validation_error& e) {
        const std::string scope = e.field() == "P" || e.field() == "cc" || e.field() == "rc" ||
                                          e.field() == "unit_cycles"
                                      ? "platform."
                                      : "workload.";
        throw validation_error(scope + e.field(), scope + e.field() + ": " + e.what());
    }
    return f;
}

inline ParamsFile load_params(const std::string& path) { return params_from_json(read_json_file(path)); }

inline json platform_json(const PlatformParams& p) {
    return {{"P", p.P}, {"cc_uow", p.cc}, {"rc_uow", p.rc}, {"unit_cycles", p.unit_cycles}};
}

inline json params_json(const PlatformParams& p, const WorkloadParams& w) {
    return {{"platform", platform_json(p)},
            {"workload",
             {{"cw_mean", w.cw_mean},
              {"cw_dist", detail::distribution_json(w.cw_dist)},
              {"pw_mean", w.pw_mean},
              {"pw_dist", detail::distribution_json(w.pw_dist)}}}};
}

inline multistage::StageSpec stages_from_json(const json& arr, const std::string& path = "stages") {
    if (!arr.is_array()) throw validation_error(path, path + ": expected an array");
    multistage::StageSpec spec;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string at = path + "[" + std::to_string(i) + "]";
        multistage::Stage st;
        st.rc = detail::number(arr[i], "rc", at);
        st.cw = detail::number(arr[i], "cw", at);
        st.cc = detail::number(arr[i], "cc", at);
        const auto& var = detail::member(arr[i], "var", at);
        st.var = var.is_string() ? var.get<std::string>() : var.dump();
        spec.stages.push_back(std::move(st));
    }
    multistage::validate(spec);
    return spec;
}

inline multistage::StageSpec load_stages(const std::string& path) {
    const auto doc = read_json_file(path);
    return stages_from_json(detail::member(doc, "stages", "spec"));
}

inline multistage::MixedWorkload mix_from_json(const json& doc) {
    const auto& arr = detail::member(doc, "mix", "spec");
    if (!arr.is_array()) throw validation_error("mix", "mix: expected an array");
    multistage::MixedWorkload mix;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string at = "mix[" + std::to_string(i) + "]";
        mix.ops.emplace_back(stages_from_json(detail::member(arr[i], "stages", at), at + ".stages"),
                             detail::number(arr[i], "weight", at));
    }
    multistage::validate(mix);
    return mix;
}

inline json stages_json(const multistage::StageSpec& spec) {
    json arr = json::array();
    for (const auto& st : spec.stages)
        arr.push_back({{"rc", st.rc}, {"cw", st.cw}, {"cc", st.cc}, {"var", st.var}});
    return {{"stages", arr}};
}

inline json markov_artifacts_json(const markov::MarkovArtifacts& a) {
    json M = json::array();
    for (std::size_t i = 0; i < a.M.size(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < a.M.size(); ++j) row.push_back(a.M(i, j));
        M.push_back(std::move(row));
    }
    return {{"P", a.partition.P},
            {"i_hi", a.partition.i_hi},
            {"expansion", a.profile.e},
            {"retry_length", a.profile.rw},
            {"transition_matrix", M},
            {"stationary", a.v},
            {"stationary_method", markov::to_string(a.method)},
            {"stationary_residual", a.stationary_residual},
            {"success_period", a.Q},
            {"failures", a.F},
            {"slack", a.Eslack}};
}

struct AdvisoryReport {
    double pw_star = 0;
    double backoff_uow = 0;
    double backoff_cycles = 0;
    std::optional<int> mm_k;
    std::vector<std::string> flags;
};

inline json advisory_json(const AdvisoryReport& r) {
    return {{"pw_star", r.pw_star},
            {"backoff_uow", r.backoff_uow},
            {"backoff_cycles", r.backoff_cycles},
            {"mm_k", r.mm_k ? json(*r.mm_k) : json(nullptr)},
            {"flags", r.flags}};
}

}  // namespace lfperf::io

#endif  // LFPERF_PARAMS_IO_HPP
