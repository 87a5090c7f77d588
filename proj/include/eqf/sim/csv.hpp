#pragma once

#include <eqf/errors.hpp>
#include <eqf/sim/harness.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eqf::sim {

// Shortest decimal that round-trips to the same double.
inline void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline constexpr std::string_view kTrialHeader = "t,ekf_angle,eqf_angle,eqfstar_angle,ekf_lyap,eqf_lyap,eqfstar_lyap";
inline constexpr std::string_view kAggregateHeader =
    "t,filter,p25_angle,p50_angle,p75_angle,p25_lyap,p50_lyap,p75_lyap";
inline constexpr std::string_view kLinmapHeader = "theta,phi,ekf_err,eqf_err,eqfstar_err";

inline std::string trial_csv(const TrialRecord& rec) {
    std::string out(kTrialHeader);
    out += '\n';
    for (std::size_t k = 0; k < rec.t.size(); ++k) {
        append_number(out, rec.t[k]);
        for (const auto& series : rec.angle) {
            out += ',';
            append_number(out, series[k]);
        }
        for (const auto& series : rec.lyap) {
            out += ',';
            append_number(out, series[k]);
        }
        out += '\n';
    }
    return out;
}

inline std::string aggregate_csv(const AggregateRecord& agg) {
    std::string out(kAggregateHeader);
    out += '\n';
    for (std::size_t k = 0; k < agg.t.size(); ++k) {
        for (Filter f : kFilters) {
            append_number(out, agg.t[k]);
            out += ',';
            out += filter_name(f);
            for (const Percentiles* p : {&agg.angle_of(f), &agg.lyap_of(f)}) {
                for (const auto* series : {&p->p25, &p->p50, &p->p75}) {
                    out += ',';
                    append_number(out, (*series)[k]);
                }
            }
            out += '\n';
        }
    }
    return out;
}

inline std::string linmap_csv(const std::vector<LinmapRow>& rows) {
    std::string out(kLinmapHeader);
    out += '\n';
    for (const auto& r : rows) {
        for (double v : {r.theta, r.phi, r.ekf_err, r.eqf_err}) {
            append_number(out, v);
            out += ',';
        }
        append_number(out, r.eqfstar_err);
        out += '\n';
    }
    return out;
}

inline std::string trial_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "trial_%04d.csv", index);
    return buf;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace eqf::sim
