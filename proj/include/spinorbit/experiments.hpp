// experiments.hpp - Experiment configs (JSON schema v1), feasibility checks and runners
//
// Every runner returns CSV tables, a JSON metadata block and a list of named
// PASS/FAIL checks. The CLI maps schema problems to exit code 2 and numerical
// guard failures to exit code 3.

#pragma once

#include "spinorbit/classical.hpp"
#include "spinorbit/dicke.hpp"
#include "spinorbit/fitting.hpp"
#include "spinorbit/io.hpp"
#include "spinorbit/quantum.hpp"
#include "spinorbit/spin_rep.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace spinorbit::cli {

using json = nlohmann::json;

inline constexpr int schema_version = 1;
inline constexpr const char* library_version = "0.1.0";

struct SchemaError : std::invalid_argument {
    std::string path;
    SchemaError(const std::string& p, const std::string& msg) : std::invalid_argument(p + ": " + msg), path(p) {}
};

struct FeasibilityError : NumericalError {
    using NumericalError::NumericalError;
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Outcome {
    std::string experiment;
    std::vector<Check> checks;
    std::vector<io::CsvTable> tables;
    json metadata = json::object();
    double runtime_s = 0.0;

    bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }

    void check(std::string name, bool pass, std::string detail) {
        checks.push_back({std::move(name), pass, std::move(detail)});
    }
};

struct RunOptions {
    int threads = 1;
    std::uint64_t seed = 0;  // reserved; runs are deterministic
};

inline std::string fmt(double v) { return io::format_double(v); }

// --------------------------- shared check routines ----------------------------

struct SpinCheckRow {
    double s = 0.0;
    int N = 0;
    double commutator = 0.0;
    double ladder = 0.0;
    double adjoint_conjugation = 0.0;  // closed form vs D^* S D
    double adjoint_ladder = 0.0;       // ladder closed form vs D^* S± D
    double adjoint_riemann = 0.0;      // eta form vs D^* S D
    double decomposition = 0.0;        // two-term residual
    double beyond_two_terms = 0.0;
    double eigen_relation = 0.0;       // ||(n.S) psi + s psi||
    double tangent_orthogonality = 0.0;

    double worst() const {
        return std::max({commutator, ladder, adjoint_conjugation, adjoint_ladder, adjoint_riemann, decomposition,
                         beyond_two_terms, eigen_relation, tangent_orthogonality});
    }
};

inline std::vector<SphereDirection> random_directions(int count, std::uint32_t seed, double max_theta = pi - 0.05) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uz(std::cos(max_theta), 1.0), uphi(0.0, 2.0 * pi);
    std::vector<SphereDirection> out;
    for (int i = 0; i < count; ++i) {
        const double z = uz(rng), phi = uphi(rng);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        out.emplace_back(Vec3(r * std::cos(phi), r * std::sin(phi), z));
    }
    return out;
}

inline SpinCheckRow spin_check_row(const SpinQuantumNumber& sq, const std::vector<SphereDirection>& dirs) {
    const SpinRepresentation r = build_spin_representation(sq);
    SpinCheckRow row;
    row.s = sq.s();
    row.N = sq.dim();
    row.commutator = su2_residual(r);
    for (int tm = -sq.twice_s(); tm < sq.twice_s(); tm += 2) {
        const Vector up = r.Splus * r.dicke_state(tm);
        row.ladder = std::max(row.ladder, (up - ladder_coefficient(sq, tm) * r.dicke_state(tm + 2)).cwiseAbs().maxCoeff());
    }
    for (const auto& n : dirs) {
        const double th = n.theta(), ph = n.phi();
        const AdjointAction conj = adjoint_action(r, n);
        const AdjointAction closed = adjoint_action_closed(r, th, ph);
        row.adjoint_conjugation = std::max({row.adjoint_conjugation, max_abs(conj.S1 - closed.S1),
                                            max_abs(conj.S2 - closed.S2), max_abs(conj.S3 - closed.S3)});
        const Matrix rot = rotation_matrix(r, n);
        const Matrix sp = rot.adjoint() * r.Splus * rot, sm = rot.adjoint() * r.Sminus * rot;
        const LadderAdjoint lad = adjoint_action_ladder_closed(r, th, ph);
        row.adjoint_ladder = std::max({row.adjoint_ladder, max_abs(lad.S3 - conj.S3), max_abs(lad.Splus - sp),
                                       max_abs(lad.Sminus - sm)});
        const LadderAdjoint rie = adjoint_action_riemann(r, n.eta());
        row.adjoint_riemann = std::max({row.adjoint_riemann, max_abs(rie.S3 - conj.S3), max_abs(rie.Splus - sp),
                                        max_abs(rie.Sminus - sm)});
        const SpinOnCoherent dec = apply_spin_to_coherent(r, n);
        row.decomposition = std::max(row.decomposition, dec.residual);
        row.beyond_two_terms = std::max(row.beyond_two_terms, dec.beyond_two_terms);
        const Vector psi = coherent_amplitudes(sq, n);
        row.eigen_relation = std::max(row.eigen_relation, (r.dot(n.vec()) * psi + sq.s() * psi).norm());
        row.tangent_orthogonality =
            std::max(row.tangent_orthogonality, std::abs(n.vec().cast<cplx>().dot(tangent_coefficient(n))));
    }
    return row;
}

struct OverlapCheck {
    double max_error = 0.0;
    double orthogonal_error = 0.0;  // |closed - 2^{-s}| and |matrix - 2^{-s}| for a perpendicular pair
};

inline OverlapCheck overlap_check(const SpinQuantumNumber& sq, int pairs, std::uint32_t seed) {
    const SpinRepresentation r = build_spin_representation(sq);
    const auto a = random_directions(pairs, seed), b = random_directions(pairs, seed + 1);
    OverlapCheck out;
    for (int i = 0; i < pairs; ++i) {
        const Vector pa = rotation_matrix(r, a[i]).col(sq.dim() - 1);
        const Vector pb = rotation_matrix(r, b[i]).col(sq.dim() - 1);
        const double matrix = std::abs(pa.dot(pb));
        out.max_error = std::max(out.max_error, std::abs(overlap_magnitude(sq, a[i], b[i]) - matrix));
    }
    const SphereDirection e1(Vec3(1, 0, 0)), e2(Vec3(0, 1, 0));
    const double expected = std::pow(2.0, -sq.s());
    const double matrix = std::abs(rotation_matrix(r, e1).col(sq.dim() - 1).dot(rotation_matrix(r, e2).col(sq.dim() - 1)));
    out.orthogonal_error = std::max(std::abs(overlap_magnitude(sq, e1, e2) - expected), std::abs(matrix - expected));
    return out;
}

// Observed RK4 order from final states at steps h, h/2, h/4 over [0, T].
inline double rk4_observed_order(const CouplingField& field, const SimulationScales& sc, const PhasePoint& z0,
                                 const SphereDirection& n0, double T, double h) {
    auto final_state = [&](double step) {
        IntegrationOptions o;
        o.max_step = step;
        o.drift_tol = 1e-2;
        const SemiclassicalTrajectory tr = integrate_trajectory(field, sc, z0, n0, {0.0, T}, o);
        RealVector y(2 * z0.dim() + 5);
        y << tr.z.back().X(), tr.n.back().vec(), tr.S.back(), tr.alpha.back();
        return y;
    };
    const RealVector y1 = final_state(h), y2 = final_state(h / 2), y3 = final_state(h / 4);
    return std::log2((y1 - y2).norm() / (y2 - y3).norm());
}

// --------------------------- schema reader ------------------------------------

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string suggestion(const std::string& word, const std::vector<std::string>& options) {
    std::string best;
    std::size_t bd = std::string::npos;
    for (const auto& o : options) {
        const std::size_t d = edit_distance(word, o);
        if (d < bd) {
            bd = d;
            best = o;
        }
    }
    std::string all;
    for (const auto& o : options) all += (all.empty() ? "" : ", ") + o;
    return (bd <= 3 ? "did you mean '" + best + "'? " : std::string()) + "valid: " + all;
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    bool has(const std::string& key) const { return j_.contains(key); }
    std::string at(const std::string& key) const { return path_ + "." + key; }

    void allow_only(const std::vector<std::string>& keys) const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
                throw SchemaError(at(it.key()), "unknown field; " + suggestion(it.key(), keys));
    }

    double number(const std::string& key) const {
        if (!has(key)) throw SchemaError(at(key), "required number is missing");
        const json& v = j_.at(key);
        if (!v.is_number()) throw SchemaError(at(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw SchemaError(at(key), "expected a finite number");
        return d;
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    double positive(const std::string& key) const {
        const double v = number(key);
        if (!(v > 0.0)) throw SchemaError(at(key), "must be positive");
        return v;
    }
    double positive(const std::string& key, double fallback) const { return has(key) ? positive(key) : fallback; }

    int integer(const std::string& key, int fallback, int min_value) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw SchemaError(at(key), "expected an integer");
        const long long x = v.get<long long>();
        if (x < min_value || x > 1000000000LL)
            throw SchemaError(at(key), "must be an integer >= " + std::to_string(min_value));
        return static_cast<int>(x);
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) throw SchemaError(at(key), "expected true or false");
        return j_.at(key).get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_string()) throw SchemaError(at(key), "expected a string");
        return j_.at(key).get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::size_t min_size = 1) const {
        if (!has(key)) throw SchemaError(at(key), "required array is missing");
        const json& v = j_.at(key);
        if (!v.is_array()) throw SchemaError(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw SchemaError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        if (out.size() < min_size)
            throw SchemaError(at(key), "needs at least " + std::to_string(min_size) + " entries");
        return out;
    }

    Vec3 vec3(const std::string& key, const Vec3& fallback) const {
        if (!has(key)) return fallback;
        const auto v = numbers(key, 3);
        if (v.size() != 3) throw SchemaError(at(key), "expected exactly 3 numbers");
        return Vec3(v[0], v[1], v[2]);
    }

    Reader object(const std::string& key) const {
        if (!has(key)) throw SchemaError(at(key), "required object is missing");
        return Reader(j_.at(key), at(key));
    }

private:
    const json& j_;
    std::string path_;
};

// --------------------------- config types -------------------------------------

// H = (omega0/2)(x^2 + p^2) + hbar (c(t) + alpha x + beta p) . S with
// c(t) = c + rotating_amplitude (cos wt, sin wt, 0).
struct FieldConfig {
    Vec3 c{0.0, 0.0, 1.0};
    Vec3 alpha = Vec3::Zero();
    Vec3 beta = Vec3::Zero();
    double omega0 = 0.0;
    double rotating_amplitude = 0.0;
    double rotating_frequency = 0.0;

    HamiltonianSpec spec() const {
        HamiltonianSpec h = linear_coupling_spec(c, alpha, beta, omega0);
        const bool position_free = alpha.isZero(0.0) && beta.isZero(0.0);
        if (position_free) h.kind = HamiltonianSpec::Kind::time_only;
        if (rotating_amplitude != 0.0) {
            const Vec3 c0 = c;
            const double a = rotating_amplitude, w = rotating_frequency;
            h.c = [c0, a, w](double t) { return Vec3(c0 + a * Vec3(std::cos(w * t), std::sin(w * t), 0.0)); };
            h.autonomous = false;
        }
        h.description = position_free ? "time_only" : "linear_coupling";
        return h;
    }

    json to_json() const {
        return {{"c", {c(0), c(1), c(2)}},
                {"alpha", {alpha(0), alpha(1), alpha(2)}},
                {"beta", {beta(0), beta(1), beta(2)}},
                {"omega0", omega0},
                {"rotating_amplitude", rotating_amplitude},
                {"rotating_frequency", rotating_frequency}};
    }
};

// How s follows hbar along a ladder.
struct ScalesRule {
    enum class Mode { delta, kappa, spin } mode = Mode::delta;
    double value = 0.5;

    SimulationScales at(double hbar) const {
        switch (mode) {
            case Mode::delta: return scales_for_delta(hbar, value);
            case Mode::kappa: return scales_for_kappa(hbar, value);
            case Mode::spin: return SimulationScales(hbar, SpinQuantumNumber::from_value(value));
        }
        return scales_for_delta(hbar, value);
    }

    std::string describe() const {
        switch (mode) {
            case Mode::delta: return "s = floor(hbar^-" + fmt(value) + ")";
            case Mode::kappa: return "hbar s = " + fmt(value);
            case Mode::spin: return "s = " + fmt(value);
        }
        return "";
    }
};

struct SpinCheckConfig {
    std::vector<double> spins{0.5, 1.0, 1.5, 2.0, 5.0};
    int random_directions = 20;
    int random_pairs = 100;
    double tolerance = 1e-10;
    std::uint32_t seed = 12345;
};

struct ClassicalConfig {
    FieldConfig field;
    double hbar = 0.01;
    double s = 10.0;
    PhasePoint z0{0.5, 0.0};
    SphereDirection n0 = SphereDirection::north();
    double t_final = 1.0;
    int intervals = 100;
    double max_step = 1e-3;
    bool coupled = true;
    ActionSplit split = ActionSplit::spin_carries_coupling;
};

struct ConvergenceConfig {
    FieldConfig field;
    ScalesRule rule;
    std::vector<double> hbar{0.05, 0.02, 0.01, 0.005};
    PhasePoint z0{0.5, 0.0};
    SphereDirection n0 = SphereDirection::north();
    double t_final = 1.0;
    int intervals = 50;
    int M_min = 64;
    int M_max = 256;
    std::optional<std::pair<double, double>> slope_range;
    std::optional<double> error_above;  // every row's final infidelity must exceed this
    std::optional<double> error_below;  // every row's max phase-sensitive error must stay below this
};

struct ResidualConfig {
    FieldConfig field;
    ScalesRule rule;
    std::vector<double> hbar{0.05, 0.02, 0.01};
    PhasePoint z0{0.5, 0.0};
    SphereDirection n0 = SphereDirection::north();
    double t = 0.5;
    double dt = 1e-4;
    int M = 96;
    std::optional<double> ratio_below;  // residual / hbar must stay below
    std::optional<double> ratio_above;  // residual / hbar must stay above
};

struct DickePurityConfig {
    DickeExperimentConfig experiment;
    double max_fit_residual = 0.1;
    double closed_exact_tol = 1e-3;
};

struct PerturbationConfig {
    FieldConfig field;
    double kappa = 0.05;
    PhasePoint z0{0.5, 0.0};
    SphereDirection n0 = SphereDirection::north();
    double t_final = 0.1;
    int intervals = 20;
    double max_step = 1e-4;
    double tolerance = 0.1;
    std::vector<double> ladder_hbar;  // optional lower-bound ladder
    double epsilon = 0.2;
};

using ConfigBody = std::variant<SpinCheckConfig, ClassicalConfig, ConvergenceConfig, ResidualConfig,
                                DickePurityConfig, PerturbationConfig>;

struct ExperimentConfig {
    std::string kind;
    std::string name;
    json raw;
    ConfigBody body;
};

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"spin-check", "classical",    "convergence",
                                                "residual",   "dicke-purity", "perturbation"};
    return kinds;
}

// --------------------------- parsing ------------------------------------------

inline FieldConfig parse_field(const Reader& r) {
    r.allow_only({"c", "alpha", "beta", "omega0", "rotating_amplitude", "rotating_frequency"});
    FieldConfig f;
    f.c = r.vec3("c", f.c);
    f.alpha = r.vec3("alpha", f.alpha);
    f.beta = r.vec3("beta", f.beta);
    f.omega0 = r.number("omega0", 0.0);
    f.rotating_amplitude = r.number("rotating_amplitude", 0.0);
    f.rotating_frequency = r.number("rotating_frequency", 0.0);
    return f;
}

inline PhasePoint parse_z0(const Reader& r, const PhasePoint& fallback) {
    if (!r.has("z0")) return fallback;
    const auto v = r.numbers("z0", 2);
    if (v.size() != 2) throw SchemaError(r.at("z0"), "expected [q, p]");
    return PhasePoint(v[0], v[1]);
}

inline SphereDirection parse_n0(const Reader& r, const SphereDirection& fallback) {
    if (!r.has("n0")) return fallback;
    const Vec3 v = r.vec3("n0", Vec3::Zero());
    if (std::abs(v.norm() - 1.0) > 1e-9) throw SchemaError(r.at("n0"), "must be a unit vector");
    return SphereDirection(v);
}

inline ScalesRule parse_rule(const Reader& r) {
    const int given = (r.has("delta") ? 1 : 0) + (r.has("kappa") ? 1 : 0) + (r.has("s") ? 1 : 0);
    if (given != 1) throw SchemaError(r.path(), "exactly one of 'delta', 'kappa', 's' is required");
    ScalesRule rule;
    if (r.has("delta")) {
        rule.mode = ScalesRule::Mode::delta;
        rule.value = r.positive("delta");
    } else if (r.has("kappa")) {
        rule.mode = ScalesRule::Mode::kappa;
        rule.value = r.positive("kappa");
    } else {
        rule.mode = ScalesRule::Mode::spin;
        rule.value = r.positive("s");
        try {
            (void)SpinQuantumNumber::from_value(rule.value);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(r.at("s"), e.what());
        }
    }
    return rule;
}

inline std::vector<double> parse_hbar_list(const Reader& r, const std::string& key) {
    const auto v = r.numbers(key);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!(v[i] > 0.0 && v[i] < 1.0))
            throw SchemaError(r.at(key) + "[" + std::to_string(i) + "]", "hbar must lie in (0, 1)");
    return v;
}

inline ExperimentConfig parse_config(const json& j) {
    Reader root(j, "$");
    if (!root.has("schema_version")) throw SchemaError("$.schema_version", "required field is missing");
    if (root.integer("schema_version", 0, 0) != schema_version)
        throw SchemaError("$.schema_version", "unsupported version (expected " + std::to_string(schema_version) + ")");
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.kind = root.string("experiment", "");
    if (cfg.kind.empty()) throw SchemaError("$.experiment", "required string is missing; " + suggestion("", experiment_kinds()));
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
        throw SchemaError("$.experiment", "unknown experiment kind '" + cfg.kind + "'; " + suggestion(cfg.kind, kinds));
    cfg.name = root.string("name", cfg.kind);
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos)
        throw SchemaError("$.name", "must be a non-empty file stem");

    const std::vector<std::string> common{"schema_version", "experiment", "name"};
    auto allow = [&](std::vector<std::string> extra) {
        extra.insert(extra.end(), common.begin(), common.end());
        root.allow_only(extra);
    };

    if (cfg.kind == "spin-check") {
        allow({"spins", "random_directions", "random_pairs", "tolerance", "seed"});
        SpinCheckConfig c;
        if (root.has("spins")) {
            c.spins = root.numbers("spins");
            for (std::size_t i = 0; i < c.spins.size(); ++i) {
                try {
                    (void)SpinQuantumNumber::from_value(c.spins[i]);
                } catch (const std::invalid_argument& e) {
                    throw SchemaError(root.at("spins") + "[" + std::to_string(i) + "]", e.what());
                }
            }
        }
        c.random_directions = root.integer("random_directions", c.random_directions, 1);
        c.random_pairs = root.integer("random_pairs", c.random_pairs, 1);
        c.tolerance = root.positive("tolerance", c.tolerance);
        c.seed = static_cast<std::uint32_t>(root.integer("seed", static_cast<int>(c.seed), 0));
        cfg.body = c;
    } else if (cfg.kind == "classical") {
        allow({"field", "hbar", "s", "z0", "n0", "t_final", "intervals", "max_step", "coupled", "action_split"});
        ClassicalConfig c;
        if (root.has("field")) c.field = parse_field(root.object("field"));
        c.hbar = root.positive("hbar", c.hbar);
        c.s = root.positive("s", c.s);
        try {
            (void)SpinQuantumNumber::from_value(c.s);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(root.at("s"), e.what());
        }
        c.z0 = parse_z0(root, c.z0);
        c.n0 = parse_n0(root, c.n0);
        c.t_final = root.positive("t_final", c.t_final);
        c.intervals = root.integer("intervals", c.intervals, 1);
        c.max_step = root.positive("max_step", c.max_step);
        c.coupled = root.boolean("coupled", c.coupled);
        const std::string split = root.string("action_split", "spin");
        if (split == "spin") c.split = ActionSplit::spin_carries_coupling;
        else if (split == "orbit") c.split = ActionSplit::orbit_carries_coupling;
        else throw SchemaError(root.at("action_split"), "expected 'spin' or 'orbit'");
        cfg.body = c;
    } else if (cfg.kind == "convergence") {
        allow({"field", "delta", "kappa", "s", "hbar", "z0", "n0", "t_final", "intervals", "M_min", "M_max",
               "slope_range", "error_above", "error_below"});
        ConvergenceConfig c;
        if (root.has("field")) c.field = parse_field(root.object("field"));
        c.rule = parse_rule(root);
        c.hbar = parse_hbar_list(root, "hbar");
        c.z0 = parse_z0(root, c.z0);
        c.n0 = parse_n0(root, c.n0);
        c.t_final = root.positive("t_final", c.t_final);
        c.intervals = root.integer("intervals", c.intervals, 1);
        c.M_min = root.integer("M_min", c.M_min, 8);
        c.M_max = root.integer("M_max", c.M_max, 8);
        if (c.M_max < c.M_min) throw SchemaError(root.at("M_max"), "must be >= M_min");
        if (root.has("slope_range")) {
            const auto v = root.numbers("slope_range", 2);
            if (v.size() != 2 || v[0] > v[1]) throw SchemaError(root.at("slope_range"), "expected [low, high]");
            c.slope_range = std::make_pair(v[0], v[1]);
        }
        if (root.has("error_above")) c.error_above = root.positive("error_above");
        if (root.has("error_below")) c.error_below = root.positive("error_below");
        cfg.body = c;
    } else if (cfg.kind == "residual") {
        allow({"field", "delta", "kappa", "s", "hbar", "z0", "n0", "t", "dt", "M", "ratio_below", "ratio_above"});
        ResidualConfig c;
        if (root.has("field")) c.field = parse_field(root.object("field"));
        c.rule = parse_rule(root);
        c.hbar = parse_hbar_list(root, "hbar");
        c.z0 = parse_z0(root, c.z0);
        c.n0 = parse_n0(root, c.n0);
        c.t = root.positive("t", c.t);
        c.dt = root.positive("dt", c.dt);
        if (c.t < 2 * c.dt) throw SchemaError(root.at("t"), "must be at least 2 dt");
        c.M = root.integer("M", c.M, 8);
        if (root.has("ratio_below")) c.ratio_below = root.positive("ratio_below");
        if (root.has("ratio_above")) c.ratio_above = root.positive("ratio_above");
        cfg.body = c;
    } else if (cfg.kind == "dicke-purity") {
        allow({"lambda", "omega_c", "omega3", "n_atoms", "hbar", "s", "kappa", "theta0", "z0", "t_final", "intervals",
               "M", "quadrature_order", "interaction_picture", "max_fit_residual", "closed_exact_tol"});
        DickePurityConfig c;
        auto& e = c.experiment;
        e.params.lambda = root.number("lambda", 1.0);
        e.params.omega_c = root.positive("omega_c", 1.0);
        e.params.omega3 = root.number("omega3", 0.0);
        e.params.n_atoms = root.integer("n_atoms", 0, 0);
        e.hbar = root.positive("hbar", 0.01);
        if (root.has("s") && root.has("kappa")) throw SchemaError(root.path(), "give either 's' or 'kappa', not both");
        if (root.has("s")) {
            try {
                e.spin = SpinQuantumNumber::from_value(root.positive("s"));
            } catch (const std::invalid_argument& ex) {
                throw SchemaError(root.at("s"), ex.what());
            }
        } else {
            e.spin = scales_for_kappa(e.hbar, root.positive("kappa", 0.5)).spin;
        }
        e.n0 = dicke_initial_direction(root.number("theta0", pi / 4));
        e.z0 = parse_z0(root, e.z0);
        e.t_grid = uniform_grid(0.0, root.positive("t_final", 1.0),
                                static_cast<std::size_t>(root.integer("intervals", 20, 1)));
        e.M = root.integer("M", 256, 8);
        e.quadrature.order = root.integer("quadrature_order", 96, 4);
        e.interaction_picture = root.boolean("interaction_picture", false);
        c.max_fit_residual = root.positive("max_fit_residual", c.max_fit_residual);
        c.closed_exact_tol = root.positive("closed_exact_tol", c.closed_exact_tol);
        cfg.body = c;
    } else {
        allow({"field", "kappa", "z0", "n0", "t_final", "intervals", "max_step", "tolerance", "ladder_hbar", "epsilon"});
        PerturbationConfig c;
        if (root.has("field")) c.field = parse_field(root.object("field"));
        c.kappa = root.positive("kappa", c.kappa);
        c.z0 = parse_z0(root, c.z0);
        c.n0 = parse_n0(root, c.n0);
        c.t_final = root.positive("t_final", c.t_final);
        c.intervals = root.integer("intervals", c.intervals, 1);
        c.max_step = root.positive("max_step", c.max_step);
        c.tolerance = root.positive("tolerance", c.tolerance);
        if (root.has("ladder_hbar")) c.ladder_hbar = parse_hbar_list(root, "ladder_hbar");
        c.epsilon = root.positive("epsilon", c.epsilon);
        cfg.body = c;
    }
    return cfg;
}

// --------------------------- feasibility --------------------------------------

inline void require_localized(const PhasePoint& z, double hbar, int M, const std::string& where) {
    const double z2 = (z.q.squaredNorm() + z.p.squaredNorm()) / (2.0 * hbar);
    if (!(z2 < M / 4.0))
        throw FeasibilityError(where + ": truncation guard |zeta|^2 < M/4 fails (|zeta|^2 = " + fmt(z2) +
                               ", M = " + std::to_string(M) + "); need M > " + fmt(4.0 * z2));
}

inline void require_spin_dim(const SpinQuantumNumber& sq, const std::string& where) {
    if (sq.dim() > default_max_spin_dim)
        throw FeasibilityError(where + ": spin dimension " + std::to_string(sq.dim()) + " exceeds the maximum " +
                               std::to_string(default_max_spin_dim));
}

// Dry-run checks without computation; returns human-readable notes.
inline std::vector<std::string> validate_feasibility(const ExperimentConfig& cfg) {
    std::vector<std::string> notes;
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, SpinCheckConfig>) {
                for (double s : c.spins) require_spin_dim(SpinQuantumNumber::from_value(s), "spins");
                notes.push_back(std::to_string(c.spins.size()) + " spin values");
            } else if constexpr (std::is_same_v<T, ClassicalConfig>) {
                notes.push_back("kappa = " + fmt(c.hbar * c.s));
            } else if constexpr (std::is_same_v<T, ConvergenceConfig>) {
                for (double h : c.hbar) {
                    const SimulationScales sc = c.rule.at(h);
                    require_spin_dim(sc.spin, "hbar = " + fmt(h));
                    require_localized(c.z0, h, c.M_max, "hbar = " + fmt(h));
                    notes.push_back("hbar = " + fmt(h) + ": s = " + fmt(sc.s()) + ", kappa = " + fmt(sc.kappa()));
                }
            } else if constexpr (std::is_same_v<T, ResidualConfig>) {
                for (double h : c.hbar) {
                    const SimulationScales sc = c.rule.at(h);
                    require_spin_dim(sc.spin, "hbar = " + fmt(h));
                    require_localized(c.z0, h, c.M, "hbar = " + fmt(h));
                }
                notes.push_back(std::to_string(c.hbar.size()) + " residual rows");
            } else if constexpr (std::is_same_v<T, DickePurityConfig>) {
                const auto& e = c.experiment;
                require_spin_dim(e.spin, "s");
                require_localized(e.z0, e.hbar, e.M, "z0");
                notes.push_back("s = " + fmt(e.spin.s()) + ", kappa = " + fmt(e.hbar * e.spin.s()) +
                                ", dimension = " + std::to_string(e.M * e.spin.dim()));
            } else {
                notes.push_back("kappa = " + fmt(c.kappa));
            }
        },
        cfg.body);
    return notes;
}

// --------------------------- runners ------------------------------------------

inline Outcome run_spin_check(const SpinCheckConfig& c) {
    Outcome out;
    io::CsvTable t("algebra", {"s", "N", "commutator", "ladder", "adjoint_conjugation", "adjoint_ladder",
                               "adjoint_riemann", "decomposition", "beyond_two_terms", "eigen_relation",
                               "overlap_max_error", "orthogonal_overlap_error"});
    const auto dirs = random_directions(c.random_directions, c.seed);
    double worst_comm = 0.0;
    for (double s : c.spins) {
        const SpinQuantumNumber sq = SpinQuantumNumber::from_value(s);
        const SpinCheckRow row = spin_check_row(sq, dirs);
        const OverlapCheck ov = overlap_check(sq, c.random_pairs, c.seed + 7);
        t.add_row({row.s, row.N, row.commutator, row.ladder, row.adjoint_conjugation, row.adjoint_ladder,
                   row.adjoint_riemann, row.decomposition, row.beyond_two_terms, row.eigen_relation, ov.max_error,
                   ov.orthogonal_error});
        const double tol = c.tolerance * row.N;
        out.check("algebra s=" + fmt(s), row.worst() < tol, "worst residual " + fmt(row.worst()) + " < " + fmt(tol));
        out.check("overlap s=" + fmt(s), ov.max_error < c.tolerance && ov.orthogonal_error < 1e-12,
                  "max error " + fmt(ov.max_error) + ", orthogonal case " + fmt(ov.orthogonal_error));
        worst_comm = std::max(worst_comm, row.commutator);
    }
    out.metadata["max_commutator_residual"] = worst_comm;
    out.tables.push_back(std::move(t));
    return out;
}

inline Outcome run_classical(const ClassicalConfig& c) {
    Outcome out;
    const SimulationScales sc(c.hbar, SpinQuantumNumber::from_value(c.s));
    IntegrationOptions io;
    io.max_step = c.max_step;
    io.couple_orbit = c.coupled;
    io.split = c.split;
    const SemiclassicalTrajectory traj =
        integrate_trajectory(field_from_spec(c.field.spec()), sc, c.z0, c.n0, uniform_grid(0.0, c.t_final, c.intervals), io);
    double norm_dev = 0.0, min_im = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        norm_dev = std::max(norm_dev, std::abs(traj.n[i].vec().norm() - 1.0));
        min_im = std::min(min_im, traj.Gamma[i](0, 0).imag());
    }
    out.check("unit spin norm", norm_dev < 1e-9, "max ||n|-1| = " + fmt(norm_dev));
    out.check("pre-renormalization drift", traj.max_norm_drift < 1e-6, "max drift " + fmt(traj.max_norm_drift));
    out.check("Im Gamma positive", min_im > 0.0, "min Im Gamma = " + fmt(min_im));
    out.tables.push_back(io::trajectory_table(traj));
    out.metadata["scales"] = {{"hbar", sc.hbar}, {"s", sc.s()}, {"kappa", sc.kappa()}, {"delta", sc.delta()}};
    out.metadata["field"] = c.field.to_json();
    out.metadata["action_split"] = c.split == ActionSplit::spin_carries_coupling ? "spin" : "orbit";
    out.metadata["orbit_coupled"] = c.coupled;
    return out;
}

inline Outcome run_convergence(const ConvergenceConfig& c, const RunOptions& opt) {
    Outcome out;
    ScanCase sc;
    sc.spec = c.field.spec();
    sc.z0 = c.z0;
    sc.n0 = c.n0;
    sc.T = c.t_final;
    sc.intervals = c.intervals;
    sc.M_min = c.M_min;
    sc.M_max = c.M_max;
    std::vector<SimulationScales> scales;
    for (double h : c.hbar) scales.push_back(c.rule.at(h));
    const ScanResult res = ansatz_error_scan(sc, scales, opt.threads);

    io::CsvTable t("scan", {"hbar", "s", "kappa", "M", "N", "max_infidelity", "final_infidelity", "max_norm_error",
                            "final_norm_error", "skipped"});
    json rows = json::array();
    for (const auto& r : res.rows) {
        t.add_row({r.hbar, r.s, r.kappa, r.M, r.N, r.max_infidelity, r.final_infidelity, r.max_norm_error,
                   r.final_norm_error, r.skipped});
        rows.push_back({{"hbar", r.hbar}, {"runtime_s", r.runtime_s}, {"skipped_reason", r.reason}});
    }
    out.tables.push_back(std::move(t));
    out.metadata["rows"] = rows;
    out.metadata["rule"] = c.rule.describe();
    out.metadata["field"] = c.field.to_json();
    const bool any_skipped = std::any_of(res.rows.begin(), res.rows.end(), [](const ScanRow& r) { return r.skipped; });
    out.check("all rows feasible", !any_skipped, any_skipped ? "some rows were skipped by the truncation guard" : "ok");
    if (res.slope) {
        out.metadata["slope"] = res.slope->slope;
        out.metadata["slope_stderr"] = res.slope->slope_stderr;
    }
    if (c.slope_range) {
        const bool ok = res.slope && res.slope->slope >= c.slope_range->first && res.slope->slope <= c.slope_range->second;
        out.check("log-log slope", ok,
                  (res.slope ? "slope " + fmt(res.slope->slope) : std::string("no fit")) + " in [" +
                      fmt(c.slope_range->first) + ", " + fmt(c.slope_range->second) + "]");
    }
    if (c.error_above) {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& r : res.rows)
            if (!r.skipped) lo = std::min(lo, r.final_infidelity);
        out.check("error plateau", lo > *c.error_above, "min final infidelity " + fmt(lo) + " > " + fmt(*c.error_above));
    }
    if (c.error_below) {
        double hi = 0.0;
        for (const auto& r : res.rows)
            if (!r.skipped) hi = std::max(hi, r.max_norm_error);
        out.check("ansatz exactness", hi < *c.error_below, "max norm error " + fmt(hi) + " < " + fmt(*c.error_below));
    }
    return out;
}

inline Outcome run_residual(const ResidualConfig& c) {
    Outcome out;
    const HamiltonianSpec spec = c.field.spec();
    io::CsvTable t("residual", {"hbar", "s", "kappa", "M", "residual", "residual_over_hbar", "fd_error_estimate"});
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double h : c.hbar) {
        const SimulationScales sc = c.rule.at(h);
        const FockTruncation tr(c.M, h);
        const SpinRepresentation srep = build_spin_representation(sc.spin);
        const ResidualReport r = ansatz_residual(spec, sc, c.z0, c.n0, tr, srep, c.t, c.dt);
        t.add_row({h, sc.s(), sc.kappa(), c.M, r.residual, r.residual_over_hbar, r.fd_error_estimate});
        lo = std::min(lo, r.residual_over_hbar);
        hi = std::max(hi, r.residual_over_hbar);
    }
    out.tables.push_back(std::move(t));
    out.metadata["rule"] = c.rule.describe();
    out.metadata["field"] = c.field.to_json();
    if (c.ratio_below) out.check("residual/hbar upper bound", hi < *c.ratio_below, "max " + fmt(hi) + " < " + fmt(*c.ratio_below));
    if (c.ratio_above) out.check("residual/hbar lower bound", lo > *c.ratio_above, "min " + fmt(lo) + " > " + fmt(*c.ratio_above));
    return out;
}

inline Outcome run_dicke_purity(const DickePurityConfig& c) {
    Outcome out;
    const auto& e = c.experiment;
    const DickeResult res = dicke_purity_experiment(e);
    io::CsvTable t("purity", {"t", "P_closed", "P_exact", "bound_envelope", "fitted_c0", "P_oracle",
                              "eigenvalues_above_1e-3"});
    for (const auto& r : res.rows)
        t.add_row({r.t, r.purity_closed, r.purity_exact, r.envelope, res.fit.coefficient, r.purity_oracle,
                   r.eigenvalues_above});
    out.tables.push_back(std::move(t));
    out.metadata["g"] = res.g;
    out.metadata["kappa"] = res.kappa;
    out.metadata["s"] = e.spin.s();
    out.metadata["fitted_c0"] = res.fit.coefficient;
    out.metadata["fitted_c0_stderr"] = res.fit.stderr_;
    out.metadata["fit_relative_residual"] = res.fit.relative_residual;
    out.metadata["envelope_c0"] = res.c0_envelope;
    out.metadata["max_closed_exact_diff"] = res.max_closed_exact_diff;
    out.metadata["max_tail_mass"] = res.max_tail_mass;

    const double p0 = measured_purity(res.rows.front());
    out.check("P(0) = 1", std::abs(p0 - 1.0) < 1e-9, "P(0) = " + fmt(p0));
    if (e.params.lambda != 0.0) {
        bool below = true;
        for (const auto& r : res.rows)
            if (r.t > 0.1 && !(measured_purity(r) < 1.0)) below = false;
        out.check("purity decays", below, "P < 1 for t > 0.1");
        out.check("bound fit", res.fit.coefficient > 0.0 && res.fit.relative_residual < c.max_fit_residual,
                  "c0 = " + fmt(res.fit.coefficient) + ", relative residual " + fmt(res.fit.relative_residual));
    }
    if (e.exact && e.params.omega3 == 0.0)
        out.check("closed kernel vs exact", res.max_closed_exact_diff < c.closed_exact_tol,
                  "max |P_closed - P_exact| = " + fmt(res.max_closed_exact_diff));
    return out;
}

struct LadderBound {
    std::vector<double> hbar;
    std::vector<double> constant;  // min over t of separation / (t hbar^{1/2 - eps})
};

// Orbital separation |z^kappa_t - z^0_t| for kappa = hbar floor(hbar^{-(1/2 + eps)}).
inline LadderBound separation_ladder(const FieldConfig& f, const PhasePoint& z0, const SphereDirection& n0,
                                     const std::vector<double>& hbars, double eps, double t_final, int intervals,
                                     double max_step) {
    const CouplingField field = field_from_spec(f.spec());
    const auto [F, G] = spin_orbit_perturbation_fields(field);
    RealVector x0(5);
    x0 << z0.q(0), z0.p(0), n0.vec();
    LadderBound out;
    for (double h : hbars) {
        const SimulationScales sc = scales_for_delta(h, 0.5 + eps);
        const PerturbationReport rep =
            perturbation_divergence(F, G, sc.kappa(), x0, uniform_grid(0.0, t_final, intervals), max_step, t_final, 2);
        double c = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < rep.t.size(); ++i)
            c = std::min(c, rep.separation[i] / (rep.t[i] * std::pow(h, 0.5 - eps)));
        out.hbar.push_back(h);
        out.constant.push_back(c);
    }
    return out;
}

inline Outcome run_perturbation(const PerturbationConfig& c) {
    Outcome out;
    const CouplingField field = field_from_spec(c.field.spec());
    const auto [F, G] = spin_orbit_perturbation_fields(field);
    RealVector x0(5);
    x0 << c.z0.q(0), c.z0.p(0), c.n0.vec();
    const PerturbationReport rep =
        perturbation_divergence(F, G, c.kappa, x0, uniform_grid(0.0, c.t_final, c.intervals), c.max_step, c.t_final, 2);
    io::CsvTable t("separation", {"t", "separation", "linear_prediction"});
    for (std::size_t i = 0; i < rep.t.size(); ++i) t.add_row({rep.t[i], rep.separation[i], rep.expected_slope * rep.t[i]});
    out.tables.push_back(std::move(t));
    out.metadata["fitted_slope"] = rep.fitted_slope;
    out.metadata["expected_slope"] = rep.expected_slope;
    out.check("small-t slope", rep.relative_error < c.tolerance,
              "fitted " + fmt(rep.fitted_slope) + " vs kappa |G| = " + fmt(rep.expected_slope) + " (relative error " +
                  fmt(rep.relative_error) + ")");
    if (!c.ladder_hbar.empty()) {
        const LadderBound lb = separation_ladder(c.field, c.z0, c.n0, c.ladder_hbar, c.epsilon, c.t_final, c.intervals, c.max_step);
        io::CsvTable l("ladder", {"hbar", "lower_bound_constant"});
        double cmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < lb.hbar.size(); ++i) {
            l.add_row({lb.hbar[i], lb.constant[i]});
            cmin = std::min(cmin, lb.constant[i]);
        }
        out.tables.push_back(std::move(l));
        out.check("ladder lower bound", cmin > 0.0, "min fitted constant " + fmt(cmin));
    }
    return out;
}

inline Outcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out = std::visit(
        [&](const auto& c) -> Outcome {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, SpinCheckConfig>) return run_spin_check(c);
            else if constexpr (std::is_same_v<T, ClassicalConfig>) return run_classical(c);
            else if constexpr (std::is_same_v<T, ConvergenceConfig>) return run_convergence(c, opt);
            else if constexpr (std::is_same_v<T, ResidualConfig>) return run_residual(c);
            else if constexpr (std::is_same_v<T, DickePurityConfig>) return run_dicke_purity(c);
            else return run_perturbation(c);
        },
        cfg.body);
    out.experiment = cfg.kind;
    out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// --------------------------- artifacts ----------------------------------------

inline json provenance(const ExperimentConfig& cfg, const Outcome& out, const RunOptions& opt) {
    json checks = json::array();
    for (const auto& c : out.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return {{"schema_version", schema_version},
            {"experiment", cfg.kind},
            {"name", cfg.name},
            {"config_hash", io::fnv1a_hex(cfg.raw.dump())},
            {"versions",
             {{"spinorbit", library_version},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__}}},
            {"threads", opt.threads},
            {"seed", opt.seed},
            {"runtime_s", out.runtime_s},
            {"config", cfg.raw},
            {"results", out.metadata},
            {"checks", checks},
            {"all_pass", out.all_pass()}};
}

// Writes <name>_<table>.csv for every table and <name>.json; returns the paths.
inline std::vector<std::filesystem::path> write_artifacts(const ExperimentConfig& cfg, const Outcome& out,
                                                          const std::filesystem::path& dir, const RunOptions& opt) {
    std::vector<std::filesystem::path> paths;
    for (const auto& t : out.tables) {
        const auto p = dir / (cfg.name + "_" + t.name() + ".csv");
        io::write_atomic(p, t.str());
        paths.push_back(p);
    }
    const auto meta = dir / (cfg.name + ".json");
    io::write_atomic(meta, provenance(cfg, out, opt).dump(2) + "\n");
    paths.push_back(meta);
    return paths;
}

}  // namespace spinorbit::cli
