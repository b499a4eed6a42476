#include "sclab/harness.hpp"

#include "sclab/errors.hpp"
#include "sclab/growth.hpp"
#include "sclab/profiles.hpp"
#include "sclab/quasimode.hpp"
#include "sclab/spectral.hpp"
#include "sclab/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ------------------------------------------------------------ plumbing ---

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    auto dt = std::chrono::steady_clock::now() - t0;
    return std::chrono::duration<double, std::milli>(dt).count();
}

void add_stage_time(RunManifest& man, const std::string& name, double ms) {
    for (auto& s : man.stages)
        if (s.name == name) {
            s.wall_ms += ms;
            return;
        }
    man.stages.push_back({name, ms});
}

// Runs one pipeline stage, accumulating its wall time under `name` and
// annotating any module error with the failing stage and parameters.
template <class F>
void stage(RunManifest& man, const std::string& name, const std::string& detail, F&& body) {
    auto t0 = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const error& e) {
        std::string where = detail.empty() ? name : name + " (" + detail + ")";
        throw error(e.kind(), "stage " + where + ": " + e.what());
    }
    add_stage_time(man, name, elapsed_ms(t0));
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw io_error("cannot open " + p.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw io_error("cannot create " + tmp.string());
        os << content;
        os.flush();
        if (!os) throw io_error("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw io_error("cannot move " + tmp.string() + " into place: " + ec.message());
}

OutputRecord make_record(const std::string& rel, const std::string& content) {
    return {rel, content.size(), hex64(fnv1a(content.data(), content.size()))};
}

std::string join_csv(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += fields[i];
    }
    return line;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string q_label(double q) {
    if (std::isinf(q)) return "inf";
    if (q == std::floor(q) && std::abs(q) < 1e9)
        return std::to_string(static_cast<long long>(q));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", q);
    return buf;
}

// ------------------------------------------------------- config parsing --

void require_known_keys(const json& obj, const std::string& ctx,
                        std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw validation_error(ctx + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw validation_error("unknown key '" + it.key() + "' in " + ctx);
    }
}

const json& need(const json& obj, const std::string& ctx, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw validation_error(ctx + " is missing required key '" + key + "'");
    return *it;
}

double need_number(const json& v, const std::string& what) {
    if (!v.is_number()) throw validation_error(what + " must be a number");
    return v.get<double>();
}

long need_integer(const json& v, const std::string& what) {
    if (!v.is_number_integer()) throw validation_error(what + " must be an integer");
    return v.get<long>();
}

std::string need_string(const json& v, const std::string& what) {
    if (!v.is_string()) throw validation_error(what + " must be a string");
    return v.get<std::string>();
}

// norm exponent: a number or the string "inf"
double parse_q(const json& v, const std::string& what) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return kInf;
        throw validation_error(what + " must be a number or \"inf\"");
    }
    double q = need_number(v, what);
    if (!(q >= 1.0)) throw validation_error(what + " must be at least 1");
    return q;
}

std::vector<double> parse_q_list(const json& v, const std::string& ctx) {
    if (!v.is_array() || v.empty())
        throw validation_error(ctx + ".q must be a non-empty array");
    std::vector<double> qs;
    for (const auto& e : v) {
        double q = parse_q(e, ctx + ".q entry");
        for (double prev : qs)
            if (prev == q) throw validation_error(ctx + ".q has a duplicate entry");
        qs.push_back(q);
    }
    return qs;
}

std::vector<long> parse_k_list(const json& v, const std::string& ctx, long min_value) {
    std::vector<long> ks;
    if (v.is_array()) {
        for (const auto& e : v) ks.push_back(need_integer(e, ctx + " entry"));
    } else if (v.is_object()) {
        require_known_keys(v, ctx, {"from", "to", "factor"});
        long from = need_integer(need(v, ctx, "from"), ctx + ".from");
        long to = need_integer(need(v, ctx, "to"), ctx + ".to");
        long factor = need_integer(need(v, ctx, "factor"), ctx + ".factor");
        if (factor < 2) throw validation_error(ctx + ".factor must be at least 2");
        if (from > to) throw validation_error(ctx + " range is empty");
        for (long k = from; k <= to; k *= factor) ks.push_back(k);
    } else {
        throw validation_error(ctx + " must be an array or a from/to/factor range");
    }
    if (ks.empty()) throw validation_error(ctx + " is empty");
    for (long k : ks)
        if (k < min_value)
            throw validation_error(ctx + " entries must be at least " +
                                   std::to_string(min_value));
    return ks;
}

std::vector<int> parse_l_list(const json& v, const std::string& ctx) {
    std::vector<int> ls;
    if (v.is_array()) {
        for (const auto& e : v) ls.push_back(int(need_integer(e, ctx + " entry")));
    } else if (v.is_object()) {
        require_known_keys(v, ctx, {"from", "to", "step"});
        long from = need_integer(need(v, ctx, "from"), ctx + ".from");
        long to = need_integer(need(v, ctx, "to"), ctx + ".to");
        long step = need_integer(need(v, ctx, "step"), ctx + ".step");
        if (step < 1) throw validation_error(ctx + ".step must be positive");
        if (from > to) throw validation_error(ctx + " range is empty");
        for (long l = from; l <= to; l += step) ls.push_back(int(l));
    } else {
        throw validation_error(ctx + " must be an array or a from/to/step range");
    }
    if (ls.empty()) throw validation_error(ctx + " is empty");
    for (int l : ls)
        if (l < 1) throw validation_error(ctx + " entries must be at least 1");
    return ls;
}

ManifoldModel parse_manifold(const json& v) {
    if (!v.is_object()) throw validation_error("manifold must be an object");
    require_known_keys(v, "manifold", {"kind", "dimension"});
    std::string kind = need_string(need(v, "manifold", "kind"), "manifold.kind");
    int n = 2;
    if (v.contains("dimension")) n = int(need_integer(v["dimension"], "manifold.dimension"));
    if (kind == "torus") return ManifoldModel::torus(n);
    if (kind == "klein_bottle") {
        if (n != 2) throw validation_error("the Klein bottle is two-dimensional");
        return ManifoldModel::klein_bottle();
    }
    if (kind == "sphere") return ManifoldModel::sphere(n);
    throw validation_error("manifold.kind must be torus, klein_bottle or sphere");
}

void parse_spectrum_params(const json& p, ExperimentConfig& cfg) {
    require_known_keys(p, "params", {"lambda_max"});
    double lm = need_number(need(p, "params", "lambda_max"), "params.lambda_max");
    if (!(lm >= 0.0) || !std::isfinite(lm))
        throw validation_error("params.lambda_max must be finite and non-negative");
    cfg.spectrum.lambda_max = lm;
}

void parse_opnorm_params(const json& p, ExperimentConfig& cfg) {
    require_known_keys(p, "params", {"windows", "random_windows", "degrees"});
    auto& op = cfg.opnorm;
    if (p.contains("windows")) {
        if (!p["windows"].is_array())
            throw validation_error("params.windows must be an array");
        for (const auto& w : p["windows"]) {
            require_known_keys(w, "params.windows entry", {"lo", "hi"});
            WindowInterval iv;
            iv.lo = need_number(need(w, "window", "lo"), "window.lo");
            iv.hi = need_number(need(w, "window", "hi"), "window.hi");
            if (!(iv.lo >= 0.0) || !(iv.hi >= iv.lo) || !std::isfinite(iv.hi))
                throw validation_error("window bounds need 0 <= lo <= hi < inf");
            op.windows.push_back(iv);
        }
    }
    if (p.contains("random_windows")) {
        const json& r = p["random_windows"];
        require_known_keys(r, "params.random_windows",
                           {"count", "lambda_min", "lambda_max", "width"});
        op.random_count = need_integer(need(r, "random_windows", "count"), "count");
        op.lambda_min = need_number(need(r, "random_windows", "lambda_min"), "lambda_min");
        op.lambda_max = need_number(need(r, "random_windows", "lambda_max"), "lambda_max");
        op.width = need_number(need(r, "random_windows", "width"), "width");
        if (op.random_count < 1)
            throw validation_error("random_windows.count must be positive");
        if (!(op.lambda_min >= 0.0) || !(op.lambda_max > op.lambda_min) ||
            !std::isfinite(op.lambda_max))
            throw validation_error("random_windows needs 0 <= lambda_min < lambda_max");
        if (!(op.width > 0.0) || !std::isfinite(op.width))
            throw validation_error("random_windows.width must be positive");
    }
    if (p.contains("degrees")) {
        if (cfg.model.kind() != ManifoldKind::sphere)
            throw validation_error("params.degrees applies to sphere models only");
        if (!p["degrees"].is_array())
            throw validation_error("params.degrees must be an array");
        for (const auto& d : p["degrees"]) {
            long l = need_integer(d, "params.degrees entry");
            if (l < 0) throw validation_error("degrees must be non-negative");
            op.degrees.push_back(int(l));
        }
    }
    if (op.windows.empty() && op.random_count == 0 && op.degrees.empty())
        throw validation_error("opnorm needs windows, random_windows or degrees");
}

void parse_knapp_params(const json& p, ExperimentConfig& cfg) {
    if (!cfg.model.flat())
        throw validation_error("knapp-scan runs on flat models only");
    require_known_keys(p, "params",
                       {"k", "q", "direction", "base", "c0", "truncation_multiplier",
                        "tube_cbar", "tube_radius_factor", "grid_resolution",
                        "export_modes"});
    auto& kp = cfg.knapp;
    kp.k = parse_k_list(need(p, "params", "k"), "params.k", 2);
    kp.q = parse_q_list(need(p, "params", "q"), "params");
    const int n = cfg.model.dimension();
    if (p.contains("direction")) {
        const json& d = p["direction"];
        if (!d.is_array() || (int(d.size()) != n && d.size() != 3))
            throw validation_error("params.direction needs one integer per dimension");
        kp.direction = {0, 0, 0};
        for (std::size_t i = 0; i < d.size(); ++i)
            kp.direction[i] = std::int32_t(need_integer(d[i], "direction entry"));
        if (kp.direction == std::array<std::int32_t, 3>{0, 0, 0})
            throw validation_error("params.direction must be non-zero");
    }
    if (p.contains("base")) {
        const json& b = p["base"];
        if (!b.is_array() || int(b.size()) != n)
            throw validation_error("params.base needs one coordinate per dimension");
        for (int i = 0; i < n; ++i) {
            kp.base[i] = need_number(b[i], "base entry");
            if (!std::isfinite(kp.base[i]))
                throw validation_error("params.base must be finite");
        }
    }
    if (p.contains("c0")) kp.c0 = need_number(p["c0"], "params.c0");
    if (!(kp.c0 > 0.0 && kp.c0 < 1.0))
        throw validation_error("params.c0 must lie in (0, 1)");
    if (p.contains("truncation_multiplier"))
        kp.truncation_multiplier =
            need_number(p["truncation_multiplier"], "params.truncation_multiplier");
    if (!(kp.truncation_multiplier >= 1.0))
        throw validation_error("params.truncation_multiplier must be at least 1");
    if (p.contains("tube_cbar")) kp.tube_cbar = need_number(p["tube_cbar"], "params.tube_cbar");
    if (!(kp.tube_cbar > 0.0 && kp.tube_cbar <= 0.5))
        throw validation_error("params.tube_cbar must lie in (0, 1/2]");
    if (p.contains("tube_radius_factor"))
        kp.tube_radius_factor = need_number(p["tube_radius_factor"], "params.tube_radius_factor");
    if (!(kp.tube_radius_factor > 0.0) || !std::isfinite(kp.tube_radius_factor))
        throw validation_error("params.tube_radius_factor must be positive");
    if (p.contains("grid_resolution")) {
        kp.grid_resolution = need_integer(p["grid_resolution"], "params.grid_resolution");
        if (kp.grid_resolution < 0)
            throw validation_error("params.grid_resolution must be non-negative");
    }
    if (p.contains("export_modes")) {
        if (!p["export_modes"].is_boolean())
            throw validation_error("params.export_modes must be a boolean");
        kp.export_modes = p["export_modes"].get<bool>();
    }
}

void parse_beam_params(const json& p, ExperimentConfig& cfg) {
    if (cfg.model.kind() != ManifoldKind::sphere || cfg.model.dimension() != 2)
        throw validation_error("beam-scan runs on the 2-sphere only");
    require_known_keys(p, "params",
                       {"l", "q", "families", "tube_exponent", "grid_resolution"});
    auto& bp = cfg.beam;
    bp.l = parse_l_list(need(p, "params", "l"), "params.l");
    bp.q = parse_q_list(need(p, "params", "q"), "params");
    if (p.contains("families")) {
        const json& f = p["families"];
        if (!f.is_array() || f.empty())
            throw validation_error("params.families must be a non-empty array");
        bp.beams = bp.zonal = false;
        for (const auto& e : f) {
            std::string name = need_string(e, "families entry");
            if (name == "beam")
                bp.beams = true;
            else if (name == "zonal")
                bp.zonal = true;
            else
                throw validation_error("families entries must be beam or zonal");
        }
    }
    if (p.contains("tube_exponent"))
        bp.tube_exponent = need_number(p["tube_exponent"], "params.tube_exponent");
    if (!(bp.tube_exponent > -1.0 && bp.tube_exponent < 0.0))
        throw validation_error("params.tube_exponent must lie in (-1, 0)");
    if (p.contains("grid_resolution")) {
        bp.grid_resolution = need_integer(p["grid_resolution"], "params.grid_resolution");
        if (bp.grid_resolution < 0)
            throw validation_error("params.grid_resolution must be non-negative");
    }
}

void parse_kernel_params(const json& p, ExperimentConfig& cfg) {
    require_known_keys(p, "params", {"lambda", "n", "c0", "truncation_multiplier"});
    auto& kp = cfg.kernel;
    const json& lv = need(p, "params", "lambda");
    if (!lv.is_array() || lv.empty())
        throw validation_error("params.lambda must be a non-empty array");
    for (const auto& e : lv) {
        double lam = need_number(e, "params.lambda entry");
        if (!(lam > std::exp(1.0)) || !std::isfinite(lam))
            throw validation_error("kernel frequencies need lambda > e");
        kp.lambda.push_back(lam);
    }
    if (p.contains("n")) kp.n = int(need_integer(p["n"], "params.n"));
    if (kp.n < 1 || kp.n > 3)
        throw validation_error("params.n must be 1, 2 or 3");
    if (p.contains("c0")) kp.c0 = need_number(p["c0"], "params.c0");
    if (!(kp.c0 > 0.0 && kp.c0 < 1.0))
        throw validation_error("params.c0 must lie in (0, 1)");
    if (p.contains("truncation_multiplier"))
        kp.truncation_multiplier =
            need_number(p["truncation_multiplier"], "params.truncation_multiplier");
    if (!(kp.truncation_multiplier >= 1.0))
        throw validation_error("params.truncation_multiplier must be at least 1");
}

void parse_fit_params(const json& p, ExperimentConfig& cfg) {
    const bool classify_kind = cfg.kind == ExperimentKind::classify;
    if (classify_kind)
        require_known_keys(p, "params", {"input", "q", "n", "family"});
    else
        require_known_keys(p, "params", {"input", "q", "n", "mode", "a_fixed", "family"});
    auto& fp = cfg.fit;
    fp.input = need_string(need(p, "params", "input"), "params.input");
    if (fp.input.empty()) throw validation_error("params.input must name a CSV file");
    if (p.contains("q")) fp.q = parse_q(p["q"], "params.q");
    if (std::isinf(fp.q)) throw validation_error("fits need a finite q");
    if (p.contains("n")) fp.n = int(need_integer(p["n"], "params.n"));
    if (fp.n < 2) throw validation_error("params.n must be at least 2");
    if (p.contains("mode")) {
        std::string mode = need_string(p["mode"], "params.mode");
        if (mode == "free")
            fp.free_fit = true;
        else if (mode != "fixed")
            throw validation_error("params.mode must be fixed or free");
    }
    if (p.contains("a_fixed")) {
        fp.a_fixed = need_number(p["a_fixed"], "params.a_fixed");
        if (!std::isfinite(fp.a_fixed))
            throw validation_error("params.a_fixed must be finite");
        if (fp.free_fit)
            throw validation_error("params.a_fixed conflicts with mode free");
    }
    if (p.contains("family")) fp.family = need_string(p["family"], "params.family");
    if (!fp.family.empty() && fp.family != "beam" && fp.family != "zonal")
        throw validation_error("params.family must be beam or zonal");
    if (classify_kind) {
        // classification needs the subcritical theory: 2 < q <= q_c(n)
        if (!(fp.q > 2.0) || fp.q > critical_exponent(fp.n))
            throw validation_error("classify needs 2 < q <= the critical exponent");
    } else if (!fp.free_fit && std::isnan(fp.a_fixed)) {
        if (!(fp.q > 2.0))
            throw validation_error("fixed-mode fits without a_fixed need q > 2");
    }
}

// ---------------------------------------------------------- scan state ---

// Row checkpoint for resumable scans.  Each completed row stores its final
// CSV line (and sidecar lines), so a rerun after an interruption replays
// them without recomputation.
class ScanState {
  public:
    ScanState(const fs::path& path, const std::string& config_hash)
        : path_(path), hash_(config_hash) {
        if (!fs::exists(path_)) return;
        try {
            json j = json::parse(read_file(path_));
            if (j.at("schema").get<int>() == 1 &&
                j.at("config_hash").get<std::string>() == hash_ && j.at("rows").is_object())
                rows_ = j["rows"];
        } catch (...) {
            rows_ = json::object(); // stale or corrupt checkpoints are discarded
        }
    }

    bool has(const std::string& key) const { return rows_.contains(key); }
    const json& row(const std::string& key) const { return rows_.at(key); }

    void put(const std::string& key, json row) {
        rows_[key] = std::move(row);
        json j;
        j["schema"] = 1;
        j["config_hash"] = hash_;
        j["rows"] = rows_;
        write_file_atomic(path_, j.dump());
    }

    const fs::path& path() const { return path_; }

  private:
    fs::path path_;
    std::string hash_;
    json rows_ = json::object();
};

void register_output(std::vector<fs::path>& created, const fs::path& p) {
    for (const auto& q : created)
        if (q == p) return;
    created.push_back(p);
}

void emit(RunManifest& man, std::vector<fs::path>& created, const fs::path& dir,
          const std::string& rel, const std::string& content) {
    fs::path p = dir / rel;
    register_output(created, p);
    write_file_atomic(p, content);
    man.outputs.push_back(make_record(rel, content));
}

// --------------------------------------------------------- experiments ---

void run_spectrum(const ExperimentConfig& cfg, RunManifest& man, const fs::path& out,
                  std::vector<fs::path>& created) {
    SpectrumCacheResult cache;
    stage(man, "spectrum", "", [&] {
        cache = cache_spectrum(cfg.model, cfg.spectrum.lambda_max, (out / "cache").string());
    });
    man.cache_hits += cache.cache_hit ? 1 : 0;
    man.cache_rebuilds += cache.cache_hit ? 0 : 1;
    man.corrupt_rebuilds += cache.rebuilt_corrupt ? 1 : 0;

    stage(man, "write", "", [&] {
        std::string body = "freq,mult\n";
        std::size_t i = 0;
        while (i < cache.modes.size()) {
            std::size_t j = i;
            while (j < cache.modes.size() &&
                   cache.modes[j].frequency == cache.modes[i].frequency)
                ++j;
            body += format_double(cache.modes[i].frequency) + "," + std::to_string(j - i) + "\n";
            i = j;
        }
        emit(man, created, out, cfg.prefix + ".csv", body);
    });
}

void run_opnorm(const ExperimentConfig& cfg, RunManifest& man, const fs::path& out,
                std::vector<fs::path>& created) {
    std::vector<WindowInterval> windows = cfg.opnorm.windows;
    CounterRng rng(cfg.seed);
    for (long i = 0; i < cfg.opnorm.random_count; ++i) {
        double lo = rng.uniform(std::uint64_t(i), cfg.opnorm.lambda_min, cfg.opnorm.lambda_max);
        windows.push_back({lo, lo + cfg.opnorm.width});
    }
    for (int l : cfg.opnorm.degrees) {
        double freq = std::sqrt(double(l) * (l + cfg.model.dimension() - 1));
        windows.push_back({std::max(0.0, freq - 0.25), freq + 0.25});
    }

    std::string body = "window_lo,window_hi,modes,opnorm\n";
    for (const auto& w : windows) {
        KernelMax km;
        char detail[64];
        std::snprintf(detail, sizeof detail, "window [%.6g, %.6g]", w.lo, w.hi);
        stage(man, "opnorm", detail, [&] {
            km = opnorm_2_to_inf_argmax(cfg.model, SpectralWindow::interval(w.lo, w.hi));
        });
        body += join_csv({format_double(w.lo), format_double(w.hi),
                          std::to_string(km.modes), format_double(km.value)}) +
                "\n";
    }
    stage(man, "write", "", [&] { emit(man, created, out, cfg.prefix + ".csv", body); });
}

// One measured scan row: the primary CSV line plus its norm-sidecar lines.
struct ScanRow {
    std::string csv;
    std::vector<std::string> norms;
    std::string export_rel; // optional coefficient export path
};

ScanRow scan_row_from_json(const json& j) {
    ScanRow row;
    row.csv = j.at("csv").get<std::string>();
    for (const auto& s : j.at("norms")) row.norms.push_back(s.get<std::string>());
    if (j.contains("export")) row.export_rel = j["export"].get<std::string>();
    return row;
}

json scan_row_to_json(const ScanRow& row) {
    json j;
    j["csv"] = row.csv;
    j["norms"] = row.norms;
    if (!row.export_rel.empty()) j["export"] = row.export_rel;
    return j;
}

// Norm sidecar line: manifold (quoted; torus descriptors contain commas),
// lambda, window policy, q, norm, grid resolution, wall time.
std::string norm_line(const ManifoldModel& model, double lambda, const char* policy,
                      double q, double norm, long res, double ms) {
    return join_csv({"\"" + model.descriptor() + "\"", format_double(lambda), policy,
                     q_label(q), format_double(norm), std::to_string(res),
                     format_double(ms)});
}

std::string quasimode_export_json(const ExperimentConfig& cfg, long k, double lambda,
                                  const CoefficientVector& coeffs) {
    const auto& kp = cfg.knapp;
    json j;
    j["schema"] = 1;
    j["manifold"] = cfg.model.descriptor();
    j["type"] = "knapp";
    json prm;
    prm["k"] = k;
    prm["c0"] = kp.c0;
    prm["truncation_multiplier"] = kp.truncation_multiplier;
    prm["direction"] = {kp.direction[0], kp.direction[1], kp.direction[2]};
    prm["base"] = {kp.base[0], kp.base[1], kp.base[2], kp.base[3]};
    j["params"] = prm;
    j["lambda"] = lambda;
    json arr = json::array();
    for (const auto& e : coeffs.entries()) {
        json c;
        c["label"] = {e.index.label[0], e.index.label[1], e.index.label[2], e.index.label[3]};
        c["re"] = e.value.real();
        c["im"] = e.value.imag();
        arr.push_back(std::move(c));
    }
    j["coeffs"] = std::move(arr);
    return j.dump() + "\n";
}

void run_knapp(const ExperimentConfig& cfg, RunManifest& man, const fs::path& out,
               std::vector<fs::path>& created, const NormOptions& opts) {
    const auto& kp = cfg.knapp;
    GeodesicSpec geo;
    stage(man, "geodesic", "", [&] {
        geo = periodic_geodesic(cfg.model, kp.direction, kp.base);
        for (long k : kp.k)
            if (!(geo.frequency(k) > std::exp(1.0)))
                throw validation_error("k = " + std::to_string(k) +
                                       " gives lambda <= e; log windows need larger k");
    });

    // measured q set: L^2 always, then the requested list
    std::vector<double> qs{2.0};
    for (double q : kp.q)
        if (q != 2.0) qs.push_back(q);

    ScanState state(out / (cfg.prefix + ".scan-manifest.json"), man.config_hash);
    register_output(created, state.path());

    std::vector<ScanRow> rows;
    for (long k : kp.k) {
        const std::string key = std::to_string(k);
        if (state.has(key)) {
            ScanRow row = scan_row_from_json(state.row(key));
            if (!row.export_rel.empty()) register_output(created, out / row.export_rel);
            rows.push_back(std::move(row));
            ++man.resumed_rows;
            continue;
        }
        const std::string detail = "k=" + std::to_string(k);
        const double lambda = geo.frequency(k);
        const double delta = 1.0 / std::log(lambda);

        CoefficientVector coeffs(cfg.model);
        double defect_v = 0.0, budget_v = 0.0;
        stage(man, "construct", detail, [&] {
            KnappParams prm;
            prm.c0 = kp.c0;
            prm.k = int(k);
            prm.truncation_multiplier = kp.truncation_multiplier;
            coeffs = knapp_flat(cfg.model, geo, prm);
            defect_v = defect(cfg.model, lambda, coeffs);
            budget_v = quasimode_budget(cfg.model, lambda, coeffs, delta);
        });

        ScanRow row;
        stage(man, "measure", detail, [&] {
            const double T = 1.0 / delta;
            const double radius = kp.tube_radius_factor * std::sqrt(T / lambda);
            CoefficientEvaluator eval(coeffs, lambda);
            long res = kp.grid_resolution;
            if (res == 0) {
                for (double q : qs) res = std::max(res, eval.envelope_resolution(q));
                res = std::max(res, std::lround(4.0 / radius) + 1);
            }
            QuadratureGrid grid = quadrature_grid(cfg.model, res);
            TubeSpec tube = TubeSpec::flat(geo, radius, kp.tube_cbar);
            auto t0 = std::chrono::steady_clock::now();
            GridMeasurement gm = grid_measure(eval, grid, qs, &tube, opts);
            const double ms = elapsed_ms(t0);

            std::vector<std::string> fields{std::to_string(k), format_double(lambda),
                                            std::to_string(coeffs.size()),
                                            format_double(gm.norms[0]),
                                            format_double(defect_v), format_double(budget_v)};
            for (double q : kp.q) {
                std::size_t at = 0;
                for (std::size_t j = 0; j < qs.size(); ++j)
                    if (qs[j] == q) at = j;
                fields.push_back(format_double(gm.norms[at]));
            }
            fields.push_back(format_double(gm.tube_mass));
            row.csv = join_csv(fields);
            for (std::size_t j = 0; j < qs.size(); ++j)
                row.norms.push_back(
                    norm_line(cfg.model, lambda, "log", qs[j], gm.norms[j], res, ms));
        });

        if (kp.export_modes) {
            stage(man, "export", detail, [&] {
                row.export_rel = cfg.prefix + ".k" + std::to_string(k) + ".quasimode.json";
                fs::path p = out / row.export_rel;
                register_output(created, p);
                write_file_atomic(p, quasimode_export_json(cfg, k, lambda, coeffs));
            });
        }
        state.put(key, scan_row_to_json(row));
        rows.push_back(std::move(row));
    }

    stage(man, "write", "", [&] {
        std::string header = "k,lambda,modes,norm2,defect,budget";
        for (double q : kp.q) header += ",norm_q" + q_label(q);
        header += ",tube_mass\n";
        std::string body = header;
        std::string norms_body = "manifold,lambda,delta_policy,q,norm,grid_resolution,runtime_ms\n";
        for (const auto& r : rows) {
            body += r.csv + "\n";
            for (const auto& line : r.norms) norms_body += line + "\n";
        }
        emit(man, created, out, cfg.prefix + ".csv", body);
        emit(man, created, out, cfg.prefix + ".norms.csv", norms_body);
        for (const auto& r : rows)
            if (!r.export_rel.empty())
                man.outputs.push_back(make_record(r.export_rel, read_file(out / r.export_rel)));
    });

    std::error_code ec;
    fs::remove(state.path(), ec);
}

void run_beam(const ExperimentConfig& cfg, RunManifest& man, const fs::path& out,
              std::vector<fs::path>& created, const NormOptions& opts) {
    const auto& bp = cfg.beam;
    std::vector<double> qs{2.0};
    for (double q : bp.q)
        if (q != 2.0) qs.push_back(q);

    std::vector<std::string> families;
    if (bp.beams) families.push_back("beam");
    if (bp.zonal) families.push_back("zonal");

    ScanState state(out / (cfg.prefix + ".scan-manifest.json"), man.config_hash);
    register_output(created, state.path());

    const Point north{0.0, 0.0, 1.0, 0.0};
    std::vector<ScanRow> rows;
    for (const auto& family : families) {
        for (int l : bp.l) {
            const std::string key = family + ":" + std::to_string(l);
            if (state.has(key)) {
                rows.push_back(scan_row_from_json(state.row(key)));
                ++man.resumed_rows;
                continue;
            }
            ScanRow row;
            stage(man, "measure", family + " l=" + std::to_string(l), [&] {
                std::unique_ptr<QuasimodeEvaluator> eval =
                    family == "beam" ? gaussian_beam(2, l) : zonal(2, l, north);
                const double lambda = eval->nominal_frequency();
                const double radius = std::pow(lambda, bp.tube_exponent);
                long res = bp.grid_resolution;
                if (res == 0) {
                    for (double q : qs) res = std::max(res, eval->envelope_resolution(q));
                    res = std::max(res, std::lround(4.0 * std::numbers::pi / radius) + 1);
                }
                QuadratureGrid grid = quadrature_grid(cfg.model, res);
                TubeSpec tube = TubeSpec::sphere_equator(cfg.model, radius);
                auto t0 = std::chrono::steady_clock::now();
                GridMeasurement gm = grid_measure(*eval, grid, qs, &tube, opts);
                const double ms = elapsed_ms(t0);

                std::vector<std::string> fields{family, std::to_string(l),
                                                format_double(lambda),
                                                format_double(gm.norms[0])};
                for (double q : bp.q) {
                    std::size_t at = 0;
                    for (std::size_t j = 0; j < qs.size(); ++j)
                        if (qs[j] == q) at = j;
                    fields.push_back(format_double(gm.norms[at]));
                }
                fields.push_back(format_double(gm.tube_mass));
                row.csv = join_csv(fields);
                for (std::size_t j = 0; j < qs.size(); ++j)
                    row.norms.push_back(
                        norm_line(cfg.model, lambda, "eigenspace", qs[j], gm.norms[j], res, ms));
            });
            state.put(key, scan_row_to_json(row));
            rows.push_back(std::move(row));
        }
    }

    stage(man, "write", "", [&] {
        std::string header = "family,l,lambda,norm2";
        for (double q : bp.q) header += ",norm_q" + q_label(q);
        header += ",tube_mass\n";
        std::string body = header;
        std::string norms_body = "manifold,lambda,delta_policy,q,norm,grid_resolution,runtime_ms\n";
        for (const auto& r : rows) {
            body += r.csv + "\n";
            for (const auto& line : r.norms) norms_body += line + "\n";
        }
        emit(man, created, out, cfg.prefix + ".csv", body);
        emit(man, created, out, cfg.prefix + ".norms.csv", norms_body);
    });

    std::error_code ec;
    fs::remove(state.path(), ec);
}

void run_kernel(const ExperimentConfig& cfg, RunManifest& man, const fs::path& out,
                std::vector<fs::path>& created) {
    const auto& kp = cfg.kernel;
    std::string body = "lambda,delta,k0,ratio_perp_1,ratio_axis_4t\n";
    for (double lambda : kp.lambda) {
        char detail[48];
        std::snprintf(detail, sizeof detail, "lambda=%.6g", lambda);
        stage(man, "kernel", detail, [&] {
            const double delta = 1.0 / std::log(lambda);
            const double T = std::log(lambda);
            KnappParams prm;
            prm.c0 = kp.c0;
            prm.truncation_multiplier = kp.truncation_multiplier;
            const auto k0 = knapp_kernel_rn(kp.n, Point{0, 0, 0, 0}, lambda, delta, prm);
            const double scale = std::abs(k0);
            double perp = 0.0;
            if (kp.n > 1)
                perp = std::abs(knapp_kernel_rn(kp.n, Point{0, 1, 0, 0}, lambda, delta, prm));
            const double axis =
                std::abs(knapp_kernel_rn(kp.n, Point{4 * T, 0, 0, 0}, lambda, delta, prm));
            body += join_csv({format_double(lambda), format_double(delta),
                              format_double(k0.real()), format_double(perp / scale),
                              format_double(axis / scale)}) +
                    "\n";
        });
    }
    stage(man, "write", "", [&] { emit(man, created, out, cfg.prefix + ".csv", body); });
}

void run_fit(const ExperimentConfig& cfg, RunManifest& man, const fs::path& out,
             std::vector<fs::path>& created) {
    const auto& fp = cfg.fit;
    std::vector<GrowthPoint> points;
    stage(man, "read", fp.input, [&] {
        std::istringstream is(read_file(fp.input));
        std::string line;
        if (!std::getline(is, line))
            throw validation_error("input CSV is empty: " + fp.input);
        auto header = split_csv(line);
        auto col = [&](const std::string& name) -> long {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) return long(i);
            return -1;
        };
        const long c_lambda = col("lambda");
        const long c_norm2 = col("norm2");
        const long c_q = col("norm_q" + q_label(fp.q));
        const long c_family = col("family");
        const long c_modes = col("modes");
        if (c_lambda < 0 || c_norm2 < 0 || c_q < 0)
            throw validation_error("input CSV needs lambda, norm2 and norm_q" +
                                   q_label(fp.q) + " columns");
        if (c_family >= 0 && fp.family.empty())
            throw validation_error("input CSV has families; set params.family");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            auto f = split_csv(line);
            if (long(f.size()) <= std::max({c_lambda, c_norm2, c_q, c_family, c_modes}))
                throw validation_error("short row in input CSV: " + line);
            if (c_family >= 0 && f[c_family] != fp.family) continue;
            const double lambda = parse_double(f[c_lambda]);
            const double n2 = parse_double(f[c_norm2]);
            if (!(n2 > 0.0) || (c_modes >= 0 && parse_double(f[c_modes]) == 0.0)) {
                // empty spectral windows contribute no candidate; record the skip
                ++man.skipped_rows;
                continue;
            }
            points.push_back({lambda, parse_double(f[c_q]) / n2});
        }
    });

    GrowthFit fitted;
    CurvatureVerdict verdict;
    const bool classify_kind = cfg.kind == ExperimentKind::classify;
    double a_fixed = fp.a_fixed;
    stage(man, "fit", "", [&] {
        if (classify_kind) {
            verdict = classify(fp.q, fp.n, points);
            fitted = verdict.fit;
            a_fixed = fitted.a;
        } else if (fp.free_fit) {
            fitted = fit_free(points);
        } else {
            if (std::isnan(a_fixed)) a_fixed = mu(fp.q, fp.n);
            fitted = fit_log_exponent(points, a_fixed);
        }
    });

    stage(man, "write", "", [&] {
        json j;
        j["schema"] = 1;
        j["q"] = fp.q;
        j["n"] = fp.n;
        if (fitted.a_was_fixed)
            j["a_fixed"] = a_fixed;
        else
            j["a_fixed"] = nullptr;
        j["a"] = fitted.a;
        j["b"] = fitted.b;
        j["b_stderr"] = fitted.b_stderr;
        j["log_c"] = fitted.log_c;
        j["residual"] = fitted.residual;
        j["conditioning_warning"] = fitted.conditioning_warning;
        if (classify_kind) {
            j["verdict"] = verdict_name(verdict);
            j["confidence"] = verdict.confidence;
            j["distance"] = {verdict.distance[0], verdict.distance[1], verdict.distance[2]};
        } else {
            j["verdict"] = nullptr;
            j["confidence"] = nullptr;
        }
        j["skipped_rows"] = man.skipped_rows;
        json pts = json::array();
        for (const auto& p : points) pts.push_back({{"lambda", p.lambda}, {"norm", p.norm}});
        j["points"] = std::move(pts);
        emit(man, created, out, cfg.prefix + ".fit.json", j.dump(2) + "\n");
    });
}

} // namespace

// ----------------------------------------------------------- public api --

const char* tool_version() { return "sclab 1.0.0"; }

const char* experiment_name(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::spectrum: return "spectrum";
    case ExperimentKind::opnorm: return "opnorm";
    case ExperimentKind::knapp_scan: return "knapp-scan";
    case ExperimentKind::beam_scan: return "beam-scan";
    case ExperimentKind::kernel_decay: return "kernel-decay";
    case ExperimentKind::fit: return "fit";
    case ExperimentKind::classify: return "classify";
    }
    throw contract_error("unknown experiment kind");
}

ExperimentKind experiment_from_name(const std::string& name) {
    for (ExperimentKind k :
         {ExperimentKind::spectrum, ExperimentKind::opnorm, ExperimentKind::knapp_scan,
          ExperimentKind::beam_scan, ExperimentKind::kernel_decay, ExperimentKind::fit,
          ExperimentKind::classify})
        if (name == experiment_name(k)) return k;
    throw validation_error("unknown experiment '" + name + "'");
}

std::string ExperimentConfig::config_hash() const {
    return hex64(fnv1a(canonical_text.data(), canonical_text.size()));
}

ExperimentConfig parse_config_text(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception& e) {
        throw validation_error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw validation_error("config must be a JSON object");
    require_known_keys(root, "config",
                       {"schema", "experiment", "manifold", "seed", "output", "params"});

    ExperimentConfig cfg;
    cfg.schema = int(need_integer(need(root, "config", "schema"), "schema"));
    if (cfg.schema != 1)
        throw validation_error("unsupported config schema " + std::to_string(cfg.schema));
    cfg.kind = experiment_from_name(
        need_string(need(root, "config", "experiment"), "experiment"));
    cfg.model = parse_manifold(need(root, "config", "manifold"));
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
            throw validation_error("seed must be a non-negative integer");
        long long s = root["seed"].get<long long>();
        if (s < 0) throw validation_error("seed must be a non-negative integer");
        cfg.seed = std::uint64_t(s);
    }
    if (root.contains("output")) {
        const json& o = root["output"];
        require_known_keys(o, "output", {"directory", "prefix"});
        if (o.contains("directory"))
            cfg.out_dir = need_string(o["directory"], "output.directory");
        if (o.contains("prefix")) cfg.prefix = need_string(o["prefix"], "output.prefix");
    }
    if (cfg.prefix.empty()) cfg.prefix = experiment_name(cfg.kind);
    if (cfg.out_dir.empty()) throw validation_error("output.directory must not be empty");

    const json& params = need(root, "config", "params");
    if (!params.is_object()) throw validation_error("params must be an object");
    switch (cfg.kind) {
    case ExperimentKind::spectrum: parse_spectrum_params(params, cfg); break;
    case ExperimentKind::opnorm: parse_opnorm_params(params, cfg); break;
    case ExperimentKind::knapp_scan: parse_knapp_params(params, cfg); break;
    case ExperimentKind::beam_scan: parse_beam_params(params, cfg); break;
    case ExperimentKind::kernel_decay: parse_kernel_params(params, cfg); break;
    case ExperimentKind::fit:
    case ExperimentKind::classify: parse_fit_params(params, cfg); break;
    }

    cfg.canonical_text = root.dump();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    return parse_config_text(read_file(path));
}

SpectrumCacheResult cache_spectrum(const ManifoldModel& model, double lambda_max,
                                   const std::string& cache_dir) {
    if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max))
        throw validation_error("lambda_max must be finite and non-negative");
    std::error_code ec;
    fs::create_directories(cache_dir, ec);
    if (ec) throw io_error("cannot create cache directory " + cache_dir);

    std::uint64_t lm_bits;
    static_assert(sizeof lm_bits == sizeof lambda_max);
    std::memcpy(&lm_bits, &lambda_max, sizeof lm_bits);
    SpectrumCacheResult result;
    result.path = (fs::path(cache_dir) /
                   ("spectrum-" + hex64(fnv1a(model.descriptor())) + "-" + hex64(lm_bits) +
                    ".jsonl"))
                      .string();

    if (fs::exists(result.path)) {
        bool ok = true;
        std::vector<EigenIndex> modes;
        try {
            std::istringstream is(read_file(result.path));
            std::string line;
            if (!std::getline(is, line)) throw io_error("empty cache");
            json head = json::parse(line);
            if (head.at("schema").get<int>() != 1 ||
                head.at("manifold").get<std::string>() != model.descriptor() ||
                head.at("lambda_max").get<double>() != lambda_max)
                throw io_error("cache header mismatch");
            const long count = head.at("count").get<long>();
            double prev = -1.0;
            while (std::getline(is, line)) {
                if (line.empty()) continue;
                json rec = json::parse(line);
                EigenIndex idx;
                const auto& lab = rec.at("label");
                if (!lab.is_array() || lab.size() != 4) throw io_error("bad label");
                for (int i = 0; i < 4; ++i) idx.label[i] = lab[i].get<std::int32_t>();
                idx.frequency = rec.at("freq").get<double>();
                if (idx.frequency < prev || idx.frequency >= lambda_max)
                    throw io_error("bad frequency order");
                prev = idx.frequency;
                modes.push_back(idx);
            }
            if (long(modes.size()) != count) throw io_error("record count mismatch");
        } catch (const std::exception&) {
            ok = false;
        }
        if (ok) {
            result.modes = std::move(modes);
            result.cache_hit = true;
            return result;
        }
        std::fprintf(stderr, "warning: spectrum cache %s is corrupt; rebuilding\n",
                     result.path.c_str());
        result.rebuilt_corrupt = true;
    }

    // half-open materialization [0, lambda_max)
    result.modes = enumerate_window(model, 0.0, lambda_max);
    while (!result.modes.empty() && result.modes.back().frequency >= lambda_max)
        result.modes.pop_back();

    json head;
    head["schema"] = 1;
    head["manifold"] = model.descriptor();
    head["lambda_max"] = lambda_max;
    head["count"] = result.modes.size();
    std::string body = head.dump() + "\n";
    for (const auto& m : result.modes) {
        json rec;
        rec["label"] = {m.label[0], m.label[1], m.label[2], m.label[3]};
        rec["freq"] = m.frequency;
        body += rec.dump() + "\n";
    }
    write_file_atomic(result.path, body);
    return result;
}

RunManifest run(const ExperimentConfig& cfg, int threads) {
    RunManifest man;
    man.tool_version = tool_version();
    man.experiment = experiment_name(cfg.kind);
    man.config_hash = cfg.config_hash();
    man.seed = cfg.seed;

    fs::path out(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw io_error("cannot create output directory " + cfg.out_dir);

    NormOptions opts;
    opts.alias = AliasPolicy::envelope;
    opts.threads = threads;

    std::vector<fs::path> created;
    try {
        switch (cfg.kind) {
        case ExperimentKind::spectrum: run_spectrum(cfg, man, out, created); break;
        case ExperimentKind::opnorm: run_opnorm(cfg, man, out, created); break;
        case ExperimentKind::knapp_scan: run_knapp(cfg, man, out, created, opts); break;
        case ExperimentKind::beam_scan: run_beam(cfg, man, out, created, opts); break;
        case ExperimentKind::kernel_decay: run_kernel(cfg, man, out, created); break;
        case ExperimentKind::fit:
        case ExperimentKind::classify: run_fit(cfg, man, out, created); break;
        }
    } catch (...) {
        // a failed run must not leave partial outputs behind
        for (const auto& p : created) {
            std::error_code rec;
            fs::remove(p, rec);
        }
        throw;
    }

    json j;
    j["schema"] = 1;
    j["tool_version"] = man.tool_version;
    j["experiment"] = man.experiment;
    j["config_hash"] = man.config_hash;
    j["seed"] = man.seed;
    json stages = json::array();
    for (const auto& s : man.stages)
        stages.push_back({{"name", s.name}, {"wall_ms", s.wall_ms}});
    j["stages"] = std::move(stages);
    j["cache"] = {{"hits", man.cache_hits},
                  {"rebuilds", man.cache_rebuilds},
                  {"corrupt_rebuilds", man.corrupt_rebuilds}};
    j["resumed_rows"] = man.resumed_rows;
    j["skipped_rows"] = man.skipped_rows;
    json outputs = json::array();
    for (const auto& o : man.outputs)
        outputs.push_back({{"path", o.path}, {"bytes", o.bytes}, {"fnv1a", o.digest}});
    j["outputs"] = std::move(outputs);

    fs::path mp = out / (cfg.prefix + ".manifest.json");
    write_file_atomic(mp, j.dump(2) + "\n");
    man.path = mp.string();
    return man;
}

} // namespace sclab
