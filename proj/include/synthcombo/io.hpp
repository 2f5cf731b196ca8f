#pragma once

// Files: long-format CSV panels, query and prediction CSVs, ranking CSVs,
// and versioned JSON documents for models, design plans and ground truth.
// Doubles are written in shortest round-trip form so reloads are bitwise.

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "synthcombo/design.hpp"
#include "synthcombo/errors.hpp"
#include "synthcombo/estimator.hpp"
#include "synthcombo/perm_pipeline.hpp"
#include "synthcombo/simdata.hpp"

namespace synthcombo::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

// ---------------------------------------------------------------------------
// Files and hashing

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::fail_data(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) detail::fail_data(path + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) detail::fail_data(path + ": write failed");
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << v;
    return ss.str();
}

inline std::string hash_file(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

// ---------------------------------------------------------------------------
// Numbers

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
        if (i == line.size() || line[i] == sep) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    return out;
}

[[noreturn]] inline void row_error(const std::string& source, std::size_t line, const std::string& what) {
    synthcombo::detail::fail_data(source + ":" + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_integer(const std::string& field, const std::string& name, const std::string& source, std::size_t line) {
    T v{};
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size())
        row_error(source, line, "column '" + name + "': '" + field + "' is not a valid non-negative integer");
    return v;
}

inline double parse_double(const std::string& field, const std::string& name, const std::string& source,
                           std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(v))
        row_error(source, line, "column '" + name + "': '" + field + "' is not a finite number");
    return v;
}

/// Calls row(fields, line) for every non-blank data row after checking the
/// header names.
template <typename F>
void for_each_row(std::istream& in, const std::string& source, const std::vector<std::string>& header, F&& row) {
    std::string line;
    std::size_t lineno = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (!seen_header) {
            if (fields != header) {
                std::string want;
                for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
                row_error(source, lineno, "expected header '" + want + "'");
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != header.size())
            row_error(source, lineno,
                      "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        row(fields, lineno);
    }
    if (!seen_header) synthcombo::detail::fail_data(source + ": missing header line");
}

inline void check_unit(long long u, const std::string& source, std::size_t line) {
    if (u > 10'000'000) row_error(source, line, "unit id " + std::to_string(u) + " is implausibly large");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV

/// `unit,combo,outcome`. With p == 0 the dimension is the bit width of the
/// largest combination seen (at least 1).
inline Panel parse_panel_csv(std::istream& in, const std::string& source, int p = 0) {
    synthcombo::detail::require(p >= 0 && p <= kMaxInterventions, "panel: p outside [1, 30]");
    struct Row {
        int unit;
        Mask combo;
        double y;
    };
    std::vector<Row> rows;
    int max_unit = -1;
    Mask max_combo = 0;
    detail::for_each_row(in, source, {"unit", "combo", "outcome"}, [&](const auto& f, std::size_t line) {
        const auto u = detail::parse_integer<long long>(f[0], "unit", source, line);
        if (u < 0) detail::row_error(source, line, "unit id must be >= 0");
        detail::check_unit(u, source, line);
        const auto c = detail::parse_integer<std::uint64_t>(f[1], "combo", source, line);
        const std::uint64_t limit = p > 0 ? (std::uint64_t{1} << p) - 1 : low_bits(kMaxInterventions);
        if (c > limit)
            detail::row_error(source, line, "combo " + f[1] + " exceeds 2^p - 1 = " + std::to_string(limit));
        rows.push_back({static_cast<int>(u), static_cast<Mask>(c), detail::parse_double(f[2], "outcome", source, line)});
        max_unit = std::max(max_unit, static_cast<int>(u));
        max_combo = std::max(max_combo, static_cast<Mask>(c));
    });
    const int dim = p > 0 ? p : std::max(1, static_cast<int>(std::bit_width(max_combo)));
    Panel panel(dim, static_cast<std::size_t>(max_unit + 1));
    for (const auto& r : rows) panel.add(r.unit, r.combo, r.y);
    return panel;
}

inline Panel load_panel(const std::string& path, int p = 0) {
    std::ifstream in(path);
    if (!in) synthcombo::detail::fail_data(path + ": cannot open for reading");
    return parse_panel_csv(in, path, p);
}

inline std::string panel_to_csv(const Panel& panel) {
    std::string out = "unit,combo,outcome\n";
    for (int u = 0; u < panel.n_units(); ++u)
        for (std::size_t i = 0; i < panel.observations(u); ++i)
            out += std::to_string(u) + "," + std::to_string(panel.combos[static_cast<std::size_t>(u)][i]) + "," +
                   format_double(panel.outcomes[static_cast<std::size_t>(u)][i]) + "\n";
    return out;
}

struct Query {
    int unit = 0;
    Mask combo = 0;
};

inline std::vector<Query> parse_queries_csv(std::istream& in, const std::string& source) {
    std::vector<Query> out;
    detail::for_each_row(in, source, {"unit", "combo"}, [&](const auto& f, std::size_t line) {
        const auto u = detail::parse_integer<long long>(f[0], "unit", source, line);
        if (u < 0) detail::row_error(source, line, "unit id must be >= 0");
        detail::check_unit(u, source, line);
        const auto c = detail::parse_integer<std::uint64_t>(f[1], "combo", source, line);
        if (c > low_bits(kMaxInterventions)) detail::row_error(source, line, "combo " + f[1] + " exceeds 2^30 - 1");
        out.push_back({static_cast<int>(u), static_cast<Mask>(c)});
    });
    return out;
}

inline std::vector<Query> load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) synthcombo::detail::fail_data(path + ": cannot open for reading");
    return parse_queries_csv(in, path);
}

struct PredictionRow {
    int unit = 0;
    Mask combo = 0;
    double estimate = 0.0;
    double std_err = std::numeric_limits<double>::quiet_NaN();  // NaN: no interval available
};

inline std::string predictions_to_csv(const std::vector<PredictionRow>& rows) {
    std::string out = "unit,combo,estimate,std_err\n";
    for (const auto& r : rows)
        out += std::to_string(r.unit) + "," + std::to_string(r.combo) + "," + format_double(r.estimate) + "," +
               (std::isnan(r.std_err) ? std::string() : format_double(r.std_err)) + "\n";
    return out;
}

/// `unit,ranks,outcome` with ranks such as 2-1-3; every row must rank the
/// same number of items.
inline PermPanel parse_rankings_csv(std::istream& in, const std::string& source) {
    struct Row {
        int unit;
        Permutation t;
        double y;
    };
    std::vector<Row> rows;
    int p = 0, max_unit = -1;
    detail::for_each_row(in, source, {"unit", "ranks", "outcome"}, [&](const auto& f, std::size_t line) {
        const auto u = detail::parse_integer<long long>(f[0], "unit", source, line);
        if (u < 0) detail::row_error(source, line, "unit id must be >= 0");
        detail::check_unit(u, source, line);
        std::vector<int> ranks;
        for (const auto& r : detail::split(f[1], '-')) ranks.push_back(detail::parse_integer<int>(r, "ranks", source, line));
        if (p == 0) p = static_cast<int>(ranks.size());
        if (static_cast<int>(ranks.size()) != p)
            detail::row_error(source, line, "ranking has " + std::to_string(ranks.size()) + " items, earlier rows have " +
                                                std::to_string(p));
        Permutation t;
        try {
            t = Permutation(std::move(ranks));
        } catch (const DataError& e) {
            detail::row_error(source, line, e.what());
        }
        rows.push_back({static_cast<int>(u), std::move(t), detail::parse_double(f[2], "outcome", source, line)});
        max_unit = std::max(max_unit, static_cast<int>(u));
    });
    synthcombo::detail::require(!rows.empty(), source + ": no ranking rows");
    PermPanel pp(p, static_cast<std::size_t>(max_unit + 1));
    for (auto& r : rows) pp.add(r.unit, std::move(r.t), r.y);
    return pp;
}

inline PermPanel load_rankings(const std::string& path) {
    std::ifstream in(path);
    if (!in) synthcombo::detail::fail_data(path + ": cannot open for reading");
    return parse_rankings_csv(in, path);
}

struct RankingQuery {
    int unit = 0;
    Permutation ranking;
};

/// `unit,ranks` queries against a model fit on rankings of p items.
inline std::vector<RankingQuery> parse_ranking_queries_csv(std::istream& in, const std::string& source, int p) {
    std::vector<RankingQuery> out;
    detail::for_each_row(in, source, {"unit", "ranks"}, [&](const auto& f, std::size_t line) {
        const auto u = detail::parse_integer<long long>(f[0], "unit", source, line);
        if (u < 0) detail::row_error(source, line, "unit id must be >= 0");
        detail::check_unit(u, source, line);
        std::vector<int> ranks;
        for (const auto& r : detail::split(f[1], '-')) ranks.push_back(detail::parse_integer<int>(r, "ranks", source, line));
        if (static_cast<int>(ranks.size()) != p)
            detail::row_error(source, line, "ranking has " + std::to_string(ranks.size()) + " items, model has " +
                                                std::to_string(p));
        try {
            out.push_back({static_cast<int>(u), Permutation(std::move(ranks))});
        } catch (const DataError& e) {
            detail::row_error(source, line, e.what());
        }
    });
    return out;
}

inline std::string ranks_to_string(const Permutation& t) {
    std::string s;
    for (int r : t.ranks) s += (s.empty() ? "" : "-") + std::to_string(r);
    return s;
}

inline std::string rankings_to_csv(const PermPanel& pp) {
    std::string out = "unit,ranks,outcome\n";
    for (int u = 0; u < pp.n_units(); ++u)
        for (std::size_t i = 0; i < pp.perms[static_cast<std::size_t>(u)].size(); ++i)
            out += std::to_string(u) + "," + ranks_to_string(pp.perms[static_cast<std::size_t>(u)][i]) + "," +
                   format_double(pp.outcomes[static_cast<std::size_t>(u)][i]) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// JSON helpers

inline Json num(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline double get_num(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    synthcombo::detail::fail_data("expected a number, found " + j.dump());
}

inline Json vec_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

inline Json vec_json(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

inline Eigen::VectorXd vec_from(const Json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(j[i]);
    return v;
}

inline std::vector<double> dvec_from(const Json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(get_num(x));
    return v;
}

inline Json mat_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(Eigen::VectorXd(m.row(i).transpose())));
    return rows;
}

inline Eigen::MatrixXd mat_from(const Json& j) {
    const auto r = static_cast<Eigen::Index>(j.size());
    const auto c = r > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        synthcombo::detail::require(static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) == c,
                                    "ragged matrix in JSON");
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = get_num(j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
    }
    return m;
}

inline Json sparse_json(const SparseFourierVector& v) {
    Json a = Json::array();
    for (const auto& [k, x] : v.entries()) a.push_back(Json::array({k, num(x)}));
    return a;
}

inline SparseFourierVector sparse_from(int p, const Json& j) {
    SparseFourierVector v(p);
    for (const auto& e : j) {
        const auto k = e.at(0).get<std::uint64_t>();
        synthcombo::detail::require(k <= low_bits(p), "coefficient subset " + std::to_string(k) + " exceeds 2^p - 1");
        v.set(static_cast<Mask>(k), get_num(e.at(1)));
    }
    return v;
}

/// Parses a JSON document and converts library exceptions to DataError
/// naming the source.
template <typename F>
auto with_json(const std::string& text, const std::string& source, F&& body) {
    try {
        const Json j = Json::parse(text);
        return body(j);
    } catch (const nlohmann::json::exception& e) {
        synthcombo::detail::fail_data(source + ": malformed JSON document (" + e.what() + ")");
    }
}

inline void check_schema(const Json& j, const std::string& kind, const std::string& source) {
    const auto it = j.find("schema");
    if (it == j.end() || !it->is_string() || it->get<std::string>() != kSchemaVersion)
        synthcombo::detail::fail_data(source + ": schema version " + (it == j.end() ? std::string("missing") : it->dump()) +
                                      " not supported (expected \"" + kSchemaVersion + "\")");
    if (j.value("kind", std::string()) != kind)
        synthcombo::detail::fail_data(source + ": document kind is '" + j.value("kind", std::string()) + "', expected '" +
                                      kind + "'");
}

// ---------------------------------------------------------------------------
// Estimator config and model

inline Json config_json(const EstimatorConfig& c) {
    return Json{{"horizontal", to_string(c.horizontal)},
                {"lambda", num(c.lambda)},
                {"lambda_grid", c.lambda_grid},
                {"lambda_min_ratio", num(c.lambda_min_ratio)},
                {"cv_folds", c.cv_folds},
                {"cart_nodes", c.cart_nodes},
                {"donor_threshold", num(c.donor_threshold)},
                {"min_obs", c.min_obs},
                {"vertical_threshold", num(c.vertical_threshold)},
                {"kappa_method", to_string(c.kappa.method)},
                {"kappa", c.kappa.fixed},
                {"kappa_folds", c.kappa.folds},
                {"kappa_seed", c.kappa.seed},
                {"donors", c.donors},
                {"seed", c.seed},
                {"lasso", {{"max_sweeps", c.lasso.max_sweeps}, {"tol", num(c.lasso.tol)}, {"kkt_tol", num(c.lasso.kkt_tol)}}}};
}

inline EstimatorConfig config_from(const Json& j) {
    EstimatorConfig c;
    c.horizontal = parse_horizontal(j.at("horizontal").get<std::string>());
    c.lambda = get_num(j.at("lambda"));
    c.lambda_grid = j.at("lambda_grid").get<int>();
    c.lambda_min_ratio = get_num(j.at("lambda_min_ratio"));
    c.cv_folds = j.at("cv_folds").get<int>();
    c.cart_nodes = j.at("cart_nodes").get<int>();
    c.donor_threshold = get_num(j.at("donor_threshold"));
    c.min_obs = j.at("min_obs").get<int>();
    c.vertical_threshold = get_num(j.at("vertical_threshold"));
    c.kappa.method = parse_kappa_method(j.at("kappa_method").get<std::string>());
    c.kappa.fixed = j.at("kappa").get<int>();
    c.kappa.folds = j.at("kappa_folds").get<int>();
    c.kappa.seed = j.at("kappa_seed").get<std::uint64_t>();
    c.donors = j.at("donors").get<std::vector<int>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.lasso.max_sweeps = j.at("lasso").at("max_sweeps").get<int>();
    c.lasso.tol = get_num(j.at("lasso").at("tol"));
    c.lasso.kkt_tol = get_num(j.at("lasso").at("kkt_tol"));
    return c;
}

inline UnitRole parse_role(const std::string& s) {
    if (s == "donor") return UnitRole::donor;
    if (s == "transferred") return UnitRole::transferred;
    if (s == "rejected") return UnitRole::rejected;
    synthcombo::detail::fail_data("unknown unit role '" + s + "'");
}

inline Json model_json(const FittedSynthCombo& m) {
    Json donors = Json::array();
    for (const auto& d : m.donors) {
        Json dj{{"unit", d.unit},
                {"method", to_string(d.method)},
                {"lambda", num(d.lambda)},
                {"cv_error", num(d.cv_error)},
                {"coefficients", sparse_json(d.coeffs)}};
        if (d.sr) {
            const auto& s = *d.sr;
            dj["select_ridge"] = Json{{"support", s.support}, {"coefficients", vec_json(s.coeffs)},
                                      {"gram", mat_json(s.gram)}, {"noise_var", num(s.noise_var)},
                                      {"n", s.n},           {"lambda", num(s.lambda)}};
        }
        donors.push_back(std::move(dj));
    }
    Json units = Json::array();
    for (int u = 0; u < m.n_units(); ++u) {
        const auto& t = m.transfers[static_cast<std::size_t>(u)];
        units.push_back(Json{{"role", to_string(m.roles[static_cast<std::size_t>(u)])},
                             {"cv_error", num(m.unit_cv_error[static_cast<std::size_t>(u)])},
                             {"weights", vec_json(t.weights.weights)},
                             {"rank", t.weights.rank},
                             {"singvals", vec_json(t.weights.singvals)},
                             {"spectrum", vec_json(t.weights.spectrum)},
                             {"kappa", t.kappa},
                             {"transfer_cv_error", num(t.cv_error)},
                             {"reason", t.reason}});
    }
    return Json{{"schema", kSchemaVersion}, {"kind", "synthcombo-model"},
                {"p", m.p},                 {"config", config_json(m.config)},
                {"donor_ids", m.donor_ids}, {"vertical_threshold", num(m.vertical_threshold)},
                {"donors", donors},         {"units", units}};
}

inline FittedSynthCombo model_from(const Json& j, const std::string& source) {
    check_schema(j, "synthcombo-model", source);
    FittedSynthCombo m;
    m.p = j.at("p").get<int>();
    synthcombo::detail::require(m.p >= 1 && m.p <= kMaxInterventions, source + ": p outside [1, 30]");
    m.config = config_from(j.at("config"));
    m.donor_ids = j.at("donor_ids").get<std::vector<int>>();
    m.vertical_threshold = get_num(j.at("vertical_threshold"));
    for (const auto& dj : j.at("donors")) {
        DonorModel d;
        d.unit = dj.at("unit").get<int>();
        d.method = parse_horizontal(dj.at("method").get<std::string>());
        d.lambda = get_num(dj.at("lambda"));
        d.cv_error = get_num(dj.at("cv_error"));
        d.coeffs = sparse_from(m.p, dj.at("coefficients"));
        if (dj.contains("select_ridge")) {
            const auto& s = dj.at("select_ridge");
            SelectRidgeFit f;
            f.p = m.p;
            f.support = s.at("support").get<std::vector<Mask>>();
            f.coeffs = vec_from(s.at("coefficients"));
            f.gram = mat_from(s.at("gram"));
            f.noise_var = get_num(s.at("noise_var"));
            f.n = s.at("n").get<std::size_t>();
            f.lambda = get_num(s.at("lambda"));
            synthcombo::detail::require(static_cast<std::size_t>(f.coeffs.size()) == f.support.size() &&
                                            static_cast<std::size_t>(f.gram.rows()) == f.support.size(),
                                        source + ": select-ridge block has inconsistent sizes");
            d.sr = std::move(f);
        }
        m.donors.push_back(std::move(d));
    }
    synthcombo::detail::require(m.donors.size() == m.donor_ids.size(), source + ": donor list does not match donor_ids");
    for (const auto& uj : j.at("units")) {
        m.roles.push_back(parse_role(uj.at("role").get<std::string>()));
        m.unit_cv_error.push_back(get_num(uj.at("cv_error")));
        UnitTransfer t;
        t.weights.weights = vec_from(uj.at("weights"));
        t.weights.rank = uj.at("rank").get<int>();
        t.weights.singvals = dvec_from(uj.at("singvals"));
        t.weights.spectrum = dvec_from(uj.at("spectrum"));
        t.kappa = uj.at("kappa").get<int>();
        t.cv_error = get_num(uj.at("transfer_cv_error"));
        t.reason = uj.at("reason").get<std::string>();
        if (m.roles.back() == UnitRole::transferred)
            synthcombo::detail::require(static_cast<std::size_t>(t.weights.weights.size()) == m.donors.size(),
                                        source + ": transfer weights do not match the donor count");
        m.transfers.push_back(std::move(t));
    }
    return m;
}

inline void save_model(const std::string& path, const FittedSynthCombo& m) { write_file(path, model_json(m).dump(1) + "\n"); }

inline FittedSynthCombo load_model(const std::string& path) {
    return with_json(read_file(path), path, [&](const Json& j) { return model_from(j, path); });
}

// ---------------------------------------------------------------------------
// Design plan and ground truth

inline Json plan_json(const DesignPlan& plan) {
    const auto& q = plan.params;
    return Json{{"schema", kSchemaVersion},
                {"kind", "synthcombo-plan"},
                {"params", {{"N", q.n_units}, {"p", q.p}, {"r", q.r}, {"s", q.s}, {"gamma", num(q.gamma)},
                            {"delta", num(q.delta)}, {"c1", num(q.c1)}, {"c2", num(q.c2)}, {"c3", num(q.c3)},
                            {"sims_preset", q.sims_preset}}},
                {"seed", plan.seed},
                {"donor_ids", plan.donor_ids},
                {"donor_combos", plan.donor_combos},
                {"nondonor_combos", plan.nondonor_combos}};
}

inline DesignPlan plan_from(const Json& j, const std::string& source) {
    check_schema(j, "synthcombo-plan", source);
    DesignPlan plan;
    const auto& q = j.at("params");
    plan.params.n_units = q.at("N").get<int>();
    plan.params.p = q.at("p").get<int>();
    plan.params.r = q.at("r").get<int>();
    plan.params.s = q.at("s").get<int>();
    plan.params.gamma = get_num(q.at("gamma"));
    plan.params.delta = get_num(q.at("delta"));
    plan.params.c1 = get_num(q.at("c1"));
    plan.params.c2 = get_num(q.at("c2"));
    plan.params.c3 = get_num(q.at("c3"));
    plan.params.sims_preset = q.at("sims_preset").get<bool>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.donor_ids = j.at("donor_ids").get<std::vector<int>>();
    plan.donor_combos = j.at("donor_combos").get<std::vector<Mask>>();
    plan.nondonor_combos = j.at("nondonor_combos").get<std::vector<Mask>>();
    return plan;
}

inline DesignPlan load_plan(const std::string& path) {
    return with_json(read_file(path), path, [&](const Json& j) { return plan_from(j, path); });
}

inline Json truth_json(const GroundTruth& t) {
    Json alphas = Json::array();
    for (const auto& a : t.alphas) alphas.push_back(sparse_json(a));
    return Json{{"schema", kSchemaVersion}, {"kind", "synthcombo-truth"}, {"p", t.p}, {"r", t.r}, {"s", t.s},
                {"sigmas", vec_json(t.sigmas)}, {"alphas", alphas}};
}

inline GroundTruth truth_from(const Json& j, const std::string& source) {
    check_schema(j, "synthcombo-truth", source);
    GroundTruth t;
    t.p = j.at("p").get<int>();
    synthcombo::detail::require(t.p >= 1 && t.p <= kMaxInterventions, source + ": p outside [1, 30]");
    t.r = j.at("r").get<int>();
    t.s = j.at("s").get<int>();
    t.sigmas = dvec_from(j.at("sigmas"));
    for (const auto& a : j.at("alphas")) t.alphas.push_back(sparse_from(t.p, a));
    synthcombo::detail::require(t.sigmas.size() == t.alphas.size(), source + ": sigmas and alphas differ in length");
    return t;
}

inline GroundTruth load_truth(const std::string& path) {
    return with_json(read_file(path), path, [&](const Json& j) { return truth_from(j, path); });
}

// ---------------------------------------------------------------------------
// Run manifest

struct FileDigest {
    std::string path;
    std::string fnv1a;
};

struct RunManifest {
    std::string tool = "synthcombo";
    std::string version;
    std::string command;
    Json config = Json::object();
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;

    /// Hash over the output digests only, so two runs with equal outputs
    /// agree regardless of timing.
    [[nodiscard]] std::string outputs_digest() const {
        std::string acc;
        for (const auto& f : outputs) acc += f.fnv1a + "\n";
        return hex64(fnv1a64(acc));
    }

    [[nodiscard]] Json to_json() const {
        auto files = [](const std::vector<FileDigest>& fs) {
            Json a = Json::array();
            for (const auto& f : fs) a.push_back(Json{{"path", f.path}, {"fnv1a64", f.fnv1a}});
            return a;
        };
        return Json{{"schema", kSchemaVersion}, {"kind", "synthcombo-manifest"},
                    {"tool", tool},             {"version", version},
                    {"command", command},       {"config", config},
                    {"seed", seed},             {"wall_seconds", wall_seconds},
                    {"inputs", files(inputs)},  {"outputs", files(outputs)},
                    {"outputs_digest", outputs_digest()}};
    }
};

inline FileDigest digest(const std::string& path) { return {path, hash_file(path)}; }

}  // namespace synthcombo::io
