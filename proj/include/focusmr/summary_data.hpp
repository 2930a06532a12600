#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "focusmr/errors.hpp"

namespace focusmr {

// One genetic variant's summary associations from the two samples.
struct VariantRecord {
    std::string id;
    double beta_x = 0.0; // exposure association
    double se_x = 0.0;   // its standard error, > 0
    double beta_y = 0.0; // outcome association
    double se_y = 0.0;   // its standard error, > 0
    bool is_core = false; // certified-valid instrument
};

// Input order is preserved; core/additional status lives on the records.
struct Dataset {
    std::vector<VariantRecord> variants;

    std::size_t total_count() const { return variants.size(); }

    std::size_t core_count() const {
        std::size_t n = 0;
        for (const auto& v : variants)
            if (v.is_core) ++n;
        return n;
    }

    std::vector<std::size_t> core_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < variants.size(); ++j)
            if (variants[j].is_core) idx.push_back(j);
        return idx;
    }

    std::vector<std::size_t> additional_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < variants.size(); ++j)
            if (!variants[j].is_core) idx.push_back(j);
        return idx;
    }
};

// An estimation set: either the core set alone or the core set united with
// one candidate group of additional variants.
struct InstrumentSet {
    enum class Kind { CoreOnly, CoreUnion };

    std::vector<std::size_t> indices; // sorted ascending, unique
    Kind kind = Kind::CoreOnly;
    std::size_t candidate_index = 0; // which candidate this is, CoreUnion only

    bool operator==(const InstrumentSet& o) const { return indices == o.indices; }
};

inline void check_dataset(const Dataset& ds) {
    if (ds.variants.empty())
        throw ValidationError("dataset is empty");
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < ds.variants.size(); ++j) {
        const auto& v = ds.variants[j];
        if (v.id.empty())
            throw ValidationError("variant " + std::to_string(j + 1) + " has an empty id");
        if (!seen.insert(v.id).second)
            throw ValidationError("duplicate variant id '" + v.id + "'");
        if (!(std::isfinite(v.beta_x) && std::isfinite(v.beta_y)))
            throw ValidationError("variant '" + v.id + "' has a non-finite association");
        if (!(v.se_x > 0.0) || !std::isfinite(v.se_x))
            throw ValidationError("variant '" + v.id + "' has se_exposure <= 0");
        if (!(v.se_y > 0.0) || !std::isfinite(v.se_y))
            throw ValidationError("variant '" + v.id + "' has se_outcome <= 0");
    }
    if (ds.core_count() == 0)
        throw ValidationError("dataset has no core variant");
}

inline InstrumentSet core_set(const Dataset& ds) {
    InstrumentSet s;
    s.indices = ds.core_indices();
    s.kind = InstrumentSet::Kind::CoreOnly;
    return s;
}

// Core united with the given additional indices.
inline InstrumentSet union_set(const Dataset& ds, std::vector<std::size_t> extra,
                               std::size_t candidate_index) {
    InstrumentSet s;
    s.indices = ds.core_indices();
    if (extra.empty())
        throw ValidationError("candidate set must add at least one variant to the core");
    for (std::size_t j : extra) {
        if (j >= ds.variants.size())
            throw ValidationError("candidate index out of range");
        if (ds.variants[j].is_core)
            throw ValidationError("candidate additions must be non-core variants");
    }
    s.indices.insert(s.indices.end(), extra.begin(), extra.end());
    std::sort(s.indices.begin(), s.indices.end());
    s.indices.erase(std::unique(s.indices.begin(), s.indices.end()), s.indices.end());
    s.kind = InstrumentSet::Kind::CoreUnion;
    s.candidate_index = candidate_index;
    return s;
}

// The non-core part of a set, i.e. the candidate group itself.
inline std::vector<std::size_t> additional_part(const Dataset& ds, const InstrumentSet& s) {
    std::vector<std::size_t> out;
    for (std::size_t j : s.indices)
        if (!ds.variants[j].is_core) out.push_back(j);
    return out;
}

namespace detail {

inline double parse_number(const std::string& tok, const std::string& col,
                           std::size_t line_no, const std::string& name) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw FormatError(name + ": line " + std::to_string(line_no) + ": column '" + col +
                          "': cannot parse number from '" + tok + "'");
    }
    if (pos != tok.size())
        throw FormatError(name + ": line " + std::to_string(line_no) + ": column '" + col +
                          "': trailing characters in '" + tok + "'");
    if (!std::isfinite(v))
        throw FormatError(name + ": line " + std::to_string(line_no) + ": column '" + col +
                          "': value must be finite");
    return v;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

// Tab-separated input with a header line. Required columns: id,
// beta_exposure, se_exposure, beta_outcome, se_outcome, core (0/1); any
// extra columns are ignored. Errors name the offending line and column.
inline Dataset parse_tsv(std::istream& in, const std::string& name = "<stream>") {
    std::string line;
    if (!std::getline(in, line))
        throw FormatError(name + ": missing header line");

    const auto header = detail::split_tabs(line);
    static const char* required[] = {"id",           "beta_exposure", "se_exposure",
                                     "beta_outcome", "se_outcome",    "core"};
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i)
        col.emplace(header[i], i); // first occurrence wins
    for (const char* r : required)
        if (!col.count(r))
            throw FormatError(name + ": header is missing required column '" + std::string(r) + "'");

    Dataset ds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto tok = detail::split_tabs(line);
        if (tok.size() < header.size())
            throw FormatError(name + ": line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " columns, found " +
                              std::to_string(tok.size()));
        VariantRecord v;
        v.id = tok[col["id"]];
        v.beta_x = detail::parse_number(tok[col["beta_exposure"]], "beta_exposure", line_no, name);
        v.se_x = detail::parse_number(tok[col["se_exposure"]], "se_exposure", line_no, name);
        v.beta_y = detail::parse_number(tok[col["beta_outcome"]], "beta_outcome", line_no, name);
        v.se_y = detail::parse_number(tok[col["se_outcome"]], "se_outcome", line_no, name);
        const std::string& c = tok[col["core"]];
        if (c == "0")
            v.is_core = false;
        else if (c == "1")
            v.is_core = true;
        else
            throw FormatError(name + ": line " + std::to_string(line_no) +
                              ": column 'core': expected 0 or 1, found '" + c + "'");
        if (!(v.se_x > 0.0))
            throw FormatError(name + ": line " + std::to_string(line_no) +
                              ": column 'se_exposure': must be positive");
        if (!(v.se_y > 0.0))
            throw FormatError(name + ": line " + std::to_string(line_no) +
                              ": column 'se_outcome': must be positive");
        ds.variants.push_back(std::move(v));
    }

    try {
        check_dataset(ds);
    } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
    }
    return ds;
}

inline Dataset parse_tsv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open '" + path + "'");
    return parse_tsv(in, path);
}

// Writes the canonical six columns at full precision; parse_tsv(write_tsv(ds))
// reproduces ds exactly.
inline void write_tsv(const Dataset& ds, std::ostream& out) {
    out << "id\tbeta_exposure\tse_exposure\tbeta_outcome\tse_outcome\tcore\n";
    char buf[512];
    for (const auto& v : ds.variants) {
        std::snprintf(buf, sizeof(buf), "%s\t%.17g\t%.17g\t%.17g\t%.17g\t%d\n", v.id.c_str(),
                      v.beta_x, v.se_x, v.beta_y, v.se_y, v.is_core ? 1 : 0);
        out << buf;
    }
}

inline std::string write_tsv(const Dataset& ds) {
    std::ostringstream out;
    write_tsv(ds, out);
    return out.str();
}

// Diagnostic warnings only; weak instruments are legal input.
inline std::vector<std::string> validate(const Dataset& ds) {
    std::vector<std::string> warnings;
    double conc = 0.0;
    std::size_t n_core = 0;
    for (const auto& v : ds.variants) {
        if (v.is_core) {
            conc += v.beta_x * v.beta_x / (v.se_x * v.se_x);
            ++n_core;
        }
    }
    if (n_core > 0) {
        conc /= static_cast<double>(n_core);
        if (conc < 10.0) {
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "weak core instruments: concentration %.4g is below 10", conc);
            warnings.emplace_back(buf);
        }
    }
    for (const auto& v : ds.variants) {
        if (std::fabs(v.beta_x) / v.se_x < 1.0)
            warnings.push_back("variant '" + v.id +
                               "': exposure association is below its standard error");
    }
    return warnings;
}

} // namespace focusmr
