#include "sbd/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sbd/coupling.hpp"
#include "sbd/dynamics.hpp"
#include "sbd/oracle.hpp"
#include "sbd/percolation.hpp"
#include "sbd/replicas.hpp"
#include "sbd/rng.hpp"
#include "sbd/stats.hpp"

namespace sbd {

namespace {

using nlohmann::json;

const std::vector<std::string>& known_kinds() {
    static const std::vector<std::string> kinds = {
        "simulate", "couple",    "percolate", "spatial-mixing",
        "gnz-check", "threshold", "oracle",    "partition"};
    return kinds;
}

// ---------------------------------------------------------------- block syntax

std::string strip_line(const std::string& raw) {
    std::string line = raw;
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) {
            line.erase(i);
            break;
        }
    }
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = line.find_last_not_of(" \t\r");
    return line.substr(a, b - a + 1);
}

} // namespace

json parse_block_config(const std::string& text) {
    json root = json::object();
    std::vector<json*> stack{&root};
    std::istringstream in(text);
    std::string raw;
    long line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = strip_line(raw);
        if (line.empty()) continue;
        if (line == "}") {
            if (stack.size() == 1)
                throw ConfigError("config line " + std::to_string(line_no) + ": unmatched '}'");
            stack.pop_back();
            continue;
        }
        const auto sp = line.find_first_of(" \t");
        if (sp == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key value' or 'key {', got '" + line + "'");
        }
        const std::string key = line.substr(0, sp);
        std::string rest = line.substr(sp + 1);
        const auto r0 = rest.find_first_not_of(" \t");
        rest = r0 == std::string::npos ? "" : rest.substr(r0);
        json& here = *stack.back();
        if (here.contains(key))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        if (rest == "{") {
            here[key] = json::object();
            stack.push_back(&here[key]);
            continue;
        }
        if (rest.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                              "' has no value");
        // leaf: JSON literal if it parses, bare word otherwise
        json value = json::parse(rest, nullptr, false);
        here[key] = value.is_discarded() ? json(rest) : value;
    }
    if (stack.size() != 1) throw ConfigError("config: unterminated block (missing '}')");
    return root;
}

namespace {

// ------------------------------------------------------------- field helpers

struct Check {
    std::vector<std::string> v;
    void fail(std::string msg) { v.push_back(std::move(msg)); }
};

const json* child(const json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

bool number_at(const json& j, const std::string& key, double& out) {
    const json* c = child(j, key);
    if (!c || !c->is_number()) return false;
    out = c->get<double>();
    return true;
}

double need_number(const json& j, const std::string& key, Check& c, double fallback = 0.0) {
    double out = fallback;
    if (!number_at(j, key, out)) c.fail(key + ": required number missing");
    return out;
}

long need_integer(const json& j, const std::string& key, Check& c, long fallback = 0) {
    const json* f = child(j, key);
    if (!f || !f->is_number_integer()) {
        c.fail(key + ": required integer missing");
        return fallback;
    }
    return f->get<long>();
}

long integer_or(const json& j, const std::string& key, long fallback) {
    const json* f = child(j, key);
    return f && f->is_number_integer() ? f->get<long>() : fallback;
}

double number_or(const json& j, const std::string& key, double fallback) {
    double out = fallback;
    number_at(j, key, out);
    return out;
}

std::string string_or(const json& j, const std::string& key, const std::string& fallback) {
    const json* f = child(j, key);
    return f && f->is_string() ? f->get<std::string>() : fallback;
}

bool numeric_array(const json& j, std::vector<double>& out) {
    if (!j.is_array() || j.empty()) return false;
    out.clear();
    for (const json& e : j) {
        if (!e.is_number()) return false;
        out.push_back(e.get<double>());
    }
    return true;
}

// ------------------------------------------------------------- model parsing

Box parse_region(const json& doc, Check& c) {
    const json* r = child(doc, "region");
    if (!r) {
        c.fail("region: block missing");
        return Box({0.0}, {1.0});
    }
    std::vector<double> lo, hi;
    const json* jlo = child(*r, "lower");
    const json* jhi = child(*r, "upper");
    if (!jlo || !numeric_array(*jlo, lo)) c.fail("region.lower: need a non-empty number array");
    if (!jhi || !numeric_array(*jhi, hi)) c.fail("region.upper: need a non-empty number array");
    if (lo.empty() || hi.empty()) return Box({0.0}, {1.0});
    if (lo.size() != hi.size()) {
        c.fail("region: lower and upper have different lengths");
        return Box({0.0}, {1.0});
    }
    const json* jd = child(*r, "dim");
    if (jd && jd->is_number_integer() && jd->get<long>() != static_cast<long>(lo.size()))
        c.fail("region.dim: does not match the coordinate arrays");
    try {
        return Box(lo, hi);
    } catch (const std::invalid_argument& e) {
        c.fail(std::string("region: ") + e.what());
        return Box({0.0}, {1.0});
    }
}

Potential parse_potential(const json& doc, Check& c) {
    const json* p = child(doc, "potential");
    if (!p) {
        c.fail("potential: block missing");
        return make_zero(1);
    }
    const std::string kind = string_or(*p, "kind", "");
    const long dim = integer_or(*p, "dim", 0);
    if (dim < 1) c.fail("potential.dim: required integer >= 1");
    const int d = dim < 1 ? 1 : static_cast<int>(dim);
    try {
        if (kind == "zero") return make_zero(d);
        if (kind == "hard_sphere") {
            Check local;
            const double r = need_number(*p, "r", local);
            for (auto& m : local.v) c.fail("potential." + m);
            if (!local.v.empty()) return make_zero(d);
            return make_hard_sphere(d, r);
        }
        if (kind == "strauss") {
            Check local;
            const double r = need_number(*p, "r", local);
            const double beta = need_number(*p, "beta", local);
            for (auto& m : local.v) c.fail("potential." + m);
            if (!local.v.empty()) return make_zero(d);
            return make_strauss(d, r, beta);
        }
        if (kind == "square_well") {
            Check local;
            const double r0 = need_number(*p, "r0", local);
            const double R = need_number(*p, "R", local);
            const double a = need_number(*p, "a", local);
            const double lb = need_number(*p, "L_bound", local);
            for (auto& m : local.v) c.fail("potential." + m);
            if (!local.v.empty()) return make_zero(d);
            return make_square_well(d, r0, R, a, lb);
        }
    } catch (const std::invalid_argument& e) {
        c.fail(std::string("potential: ") + e.what());
        return make_zero(d);
    }
    c.fail("potential.kind: expected zero | hard_sphere | strauss | square_well");
    return make_zero(d);
}

PointPattern parse_pattern(const json& doc, const std::string& key, int dim, Check& c) {
    PointPattern out;
    const json* p = child(doc, key);
    if (!p) return out;
    if (!p->is_array()) {
        c.fail(key + ": expected an array of points");
        return out;
    }
    long idx = 0;
    for (const json& e : *p) {
        std::vector<double> coords;
        long mult = 1;
        if (e.is_array()) {
            if (!numeric_array(e, coords)) {
                c.fail(key + "[" + std::to_string(idx) + "]: bad coordinate array");
                ++idx;
                continue;
            }
        } else if (e.is_object()) {
            const json* jc = child(e, "coords");
            if (!jc || !numeric_array(*jc, coords)) {
                c.fail(key + "[" + std::to_string(idx) + "].coords: bad coordinate array");
                ++idx;
                continue;
            }
            mult = integer_or(e, "mult", 1);
            if (mult < 1) c.fail(key + "[" + std::to_string(idx) + "].mult: must be >= 1");
        } else {
            c.fail(key + "[" + std::to_string(idx) + "]: expected array or {coords, mult}");
            ++idx;
            continue;
        }
        if (dim > 0 && static_cast<int>(coords.size()) != dim)
            c.fail(key + "[" + std::to_string(idx) + "]: dimension " +
                   std::to_string(coords.size()) + ", expected " + std::to_string(dim));
        else if (mult >= 1)
            out.add(coords, mult);
        ++idx;
    }
    return out;
}

} // namespace

GibbsModel model_from_config(const json& doc, std::vector<std::string>& violations) {
    Check c;
    GibbsModel m;
    m.phi = parse_potential(doc, c);
    m.region = parse_region(doc, c);
    if (m.region.dim != m.phi.dim)
        c.fail("region: dimension " + std::to_string(m.region.dim) +
               " does not match potential.dim " + std::to_string(m.phi.dim));
    Check lam;
    m.lambda = need_number(doc, "lambda", lam);
    c.v.insert(c.v.end(), lam.v.begin(), lam.v.end());
    m.boundary = parse_pattern(doc, "boundary", m.phi.dim, c);
    if (c.v.empty()) {
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            c.fail(e.what());
        }
    }
    violations.insert(violations.end(), c.v.begin(), c.v.end());
    return m;
}

namespace {

// ----------------------------------------------------------------- validation

std::vector<double> sample_times_from(const json& doc, double t_end, Check& c) {
    const json* st = child(doc, "sample_times");
    std::vector<double> times;
    if (st) {
        if (!numeric_array(*st, times)) {
            c.fail("sample_times: need a non-empty number array");
            times.clear();
        } else {
            for (std::size_t i = 0; i < times.size(); ++i) {
                if (times[i] < 0.0 || times[i] > t_end)
                    c.fail("sample_times[" + std::to_string(i) + "]: outside [0, t_end]");
                if (i > 0 && times[i] <= times[i - 1])
                    c.fail("sample_times: must be strictly increasing");
            }
        }
    }
    if (times.empty())
        for (int i = 0; i <= 10; ++i) times.push_back(t_end * static_cast<double>(i) / 10.0);
    return times;
}

GibbsModel coupled_models(const json& doc, Check& c, GibbsModel& m2, PointPattern& s1,
                          PointPattern& s2) {
    std::vector<std::string> vios;
    json base = doc;
    base.erase("boundary");
    GibbsModel m1;
    m1.phi = parse_potential(base, c);
    m1.region = parse_region(base, c);
    if (m1.region.dim != m1.phi.dim)
        c.fail("region: dimension does not match potential.dim");
    Check lam;
    m1.lambda = need_number(doc, "lambda", lam);
    c.v.insert(c.v.end(), lam.v.begin(), lam.v.end());
    if (m1.phi.kind == PotentialKind::custom)
        c.fail("potential: coupling requires a built-in kind");
    m2 = m1;
    m1.boundary = parse_pattern(doc, "boundary1", m1.phi.dim, c);
    m2.boundary = parse_pattern(doc, "boundary2", m1.phi.dim, c);
    s1 = parse_pattern(doc, "start1", m1.phi.dim, c);
    s2 = parse_pattern(doc, "start2", m1.phi.dim, c);
    if (c.v.empty()) {
        for (const auto* m : {&m1, &m2}) {
            try {
                m->validate();
            } catch (const std::invalid_argument& e) {
                c.fail(e.what());
            }
        }
        for (const auto& [st, mm, name] :
             {std::tuple<const PointPattern*, const GibbsModel*, const char*>{&s1, &m1, "start1"},
              {&s2, &m2, "start2"}}) {
            try {
                detail::check_initial_state(*mm, *st);
            } catch (const std::invalid_argument& e) {
                c.fail(std::string(name) + ": " + e.what());
            }
        }
    }
    return m1;
}

GnzStatistic statistic_from(const json& doc, const GibbsModel& m, Check& c) {
    const json* s = child(doc, "statistic");
    if (!s) return GnzStatistic::ones();
    const std::string kind = string_or(*s, "kind", "ones");
    if (kind == "ones") return GnzStatistic::ones();
    if (kind == "exp_influence") return GnzStatistic::exp_influence();
    if (kind == "count_equals") {
        const json* b = child(*s, "box");
        std::vector<double> lo, hi;
        if (!b || !child(*b, "lower") || !numeric_array(*child(*b, "lower"), lo) ||
            !child(*b, "upper") || !numeric_array(*child(*b, "upper"), hi)) {
            c.fail("statistic.box: count_equals needs lower/upper arrays");
            return GnzStatistic::ones();
        }
        Check tc;
        const long target = need_integer(*s, "m", tc);
        for (auto& msg : tc.v) c.fail("statistic." + msg);
        if (target < 0) c.fail("statistic.m: must be >= 0");
        try {
            Box box(lo, hi);
            if (box.dim != m.region.dim) c.fail("statistic.box: dimension mismatch");
            return GnzStatistic::count_equals(box, target < 0 ? 0 : target);
        } catch (const std::invalid_argument& e) {
            c.fail(std::string("statistic.box: ") + e.what());
            return GnzStatistic::ones();
        }
    }
    c.fail("statistic.kind: expected ones | count_equals | exp_influence");
    return GnzStatistic::ones();
}

BoundaryPairKind pair_kind_from(const json& doc, Check& c) {
    const std::string p = string_or(doc, "pair", "empty_vs_saturated");
    if (p == "identical") return BoundaryPairKind::identical;
    if (p == "empty_vs_single") return BoundaryPairKind::empty_vs_single;
    if (p == "empty_vs_saturated") return BoundaryPairKind::empty_vs_saturated;
    if (p == "poisson_pair") return BoundaryPairKind::poisson_pair;
    c.fail("pair: expected identical | empty_vs_single | empty_vs_saturated | poisson_pair");
    return BoundaryPairKind::identical;
}

// Validates as much of `doc` as possible for the given kind, collecting
// violations instead of stopping at the first.
void validate_kind(const std::string& kind, const json& doc, Check& c) {
    auto model = [&]() {
        std::vector<std::string> vios;
        GibbsModel m = model_from_config(doc, vios);
        for (auto& v : vios) c.fail(v);
        return m;
    };
    auto positive_time = [&]() {
        Check tc;
        const double t = need_number(doc, "t_end", tc);
        c.v.insert(c.v.end(), tc.v.begin(), tc.v.end());
        if (tc.v.empty() && !(t > 0.0)) c.fail("t_end: must be positive");
        return t;
    };
    auto replica_count = [&](long min_count = 1) {
        Check rc;
        const long r = need_integer(doc, "replicas", rc);
        c.v.insert(c.v.end(), rc.v.begin(), rc.v.end());
        if (rc.v.empty() && r < min_count)
            c.fail("replicas: must be at least " + std::to_string(min_count));
        return r;
    };

    if (kind == "simulate") {
        GibbsModel m = model();
        const double t = positive_time();
        replica_count();
        if (c.v.empty()) {
            sample_times_from(doc, t, c);
            try {
                detail::check_initial_state(m, parse_pattern(doc, "start", m.phi.dim, c));
            } catch (const std::invalid_argument& e) {
                c.fail(std::string("start: ") + e.what());
            }
        }
    } else if (kind == "couple") {
        GibbsModel m2;
        PointPattern s1, s2;
        coupled_models(doc, c, m2, s1, s2);
        const double t = positive_time();
        replica_count();
        if (c.v.empty()) sample_times_from(doc, t, c);
    } else if (kind == "percolate") {
        Check pc;
        Potential phi = parse_potential(doc, pc);
        c.v.insert(c.v.end(), pc.v.begin(), pc.v.end());
        if (pc.v.empty() && phi.dim > 3) c.fail("potential.dim: grid experiments cap at 3");
        if (pc.v.empty() && !(phi.range > 0.0))
            c.fail("potential: zero-range potential gives a degenerate grid cell");
        const double lambda = need_number(doc, "lambda", c);
        if (!(lambda >= 0.0)) c.fail("lambda: must be >= 0");
        const long n = need_integer(doc, "n", c);
        if (n < 1) c.fail("n: grid radius must be >= 1");
        const long m = integer_or(doc, "m", 0);
        if (m < 0 || m > n) c.fail("m: inner radius must be in [0, n]");
        Check tc;
        const double t = need_number(doc, "t", tc);
        c.v.insert(c.v.end(), tc.v.begin(), tc.v.end());
        if (tc.v.empty() && t < 0.0) c.fail("t: must be >= 0");
        replica_count();
        parse_pattern(doc, "boundary1", phi.dim, c);
        parse_pattern(doc, "boundary2", phi.dim, c);
    } else if (kind == "spatial-mixing") {
        Check pc;
        Potential phi = parse_potential(doc, pc);
        c.v.insert(c.v.end(), pc.v.begin(), pc.v.end());
        if (pc.v.empty() && phi.dim > 3) c.fail("potential.dim: grid experiments cap at 3");
        if (pc.v.empty() && !(phi.range > 0.0))
            c.fail("potential: zero-range potential gives a degenerate grid cell");
        const double lambda = need_number(doc, "lambda", c);
        if (!(lambda >= 0.0)) c.fail("lambda: must be >= 0");
        const long k = need_integer(doc, "k", c);
        if (k < 1) c.fail("k: inner radius must be >= 1");
        const json* nv = child(doc, "n_values");
        if (!nv || !nv->is_array() || nv->empty()) {
            c.fail("n_values: need a non-empty integer array");
        } else {
            for (const json& e : *nv)
                if (!e.is_number_integer() || e.get<long>() < 1) {
                    c.fail("n_values: entries must be integers >= 1");
                    break;
                }
        }
        pair_kind_from(doc, c);
        replica_count();
    } else if (kind == "gnz-check") {
        GibbsModel m = model();
        Check sc;
        const long samples = need_integer(doc, "samples", sc);
        c.v.insert(c.v.end(), sc.v.begin(), sc.v.end());
        if (sc.v.empty() && samples < 2) c.fail("samples: need at least 2");
        statistic_from(doc, m, c);
    } else if (kind == "threshold") {
        Check pc;
        parse_potential(doc, pc);
        c.v.insert(c.v.end(), pc.v.begin(), pc.v.end());
        const double tol = number_or(doc, "tolerance", 1e-9);
        if (!(tol > 0.0)) c.fail("tolerance: must be positive");
    } else if (kind == "oracle") {
        model();
        Check oc;
        const long cells = need_integer(doc, "cells", oc);
        c.v.insert(c.v.end(), oc.v.begin(), oc.v.end());
        if (oc.v.empty() && cells < 1) c.fail("cells: must be >= 1");
        if (integer_or(doc, "max_occupancy", 1) < 1) c.fail("max_occupancy: must be >= 1");
        if (const json* cmp = child(doc, "compare")) {
            if (integer_or(*cmp, "runs", 0) < 200) c.fail("compare.runs: need at least 200");
            if (!(number_or(*cmp, "t", 0.0) > 0.0)) c.fail("compare.t: must be positive");
            if (number_or(*cmp, "tolerance", 0.0) < 0.0) c.fail("compare.tolerance: must be >= 0");
        }
    } else if (kind == "partition") {
        model();
        const std::string method = string_or(doc, "method", "series");
        if (method != "series" && method != "mc")
            c.fail("method: expected series | mc");
        if (integer_or(doc, "n_max", 40) < 1) c.fail("n_max: must be >= 1");
        if (integer_or(doc, "samples_per_term", 20000) < 2) c.fail("samples_per_term: must be >= 2");
        if (integer_or(doc, "samples", 200000) < 2) c.fail("samples: must be >= 2");
        if (!(number_or(doc, "err_request", 1e-3) > 0.0)) c.fail("err_request: must be positive");
    }
}

// ------------------------------------------------------------------ emission

std::string fmt_g(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json pattern_json(const PointPattern& eta) {
    json arr = json::array();
    for (const Atom& a : eta.atoms()) arr.push_back(json{{"coords", a.loc}, {"mult", a.mult}});
    return arr;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Emitter {
    std::filesystem::path dir;
    RunResult* result;
    bool compact = false;

    void write(const std::string& name, const std::string& content) const {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        out << content;
        result->files.push_back(name);
    }
    void write_json(const std::string& name, const json& j) const {
        write(name, (compact ? j.dump() : j.dump(2)) + "\n");
    }
};

struct Csv {
    std::ostringstream out;
    explicit Csv(const std::string& header) { out << header << "\n"; }
    void row(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out << (i ? "," : "") << fmt_g(cells[i]);
        out << "\n";
    }
    std::string str() const { return out.str(); }
};

// ---------------------------------------------------------------- experiments

struct Ctx {
    const json& doc;
    uint64_t seed;
    int jobs;
    Emitter emit;
    json results = json::object();
    int exit_code = 0;
    std::string verdict = "ok";
};

void run_simulate(Ctx& ctx) {
    std::vector<std::string> vios;
    GibbsModel m = model_from_config(ctx.doc, vios);
    const double t_end = ctx.doc.at("t_end").get<double>();
    const long replicas = ctx.doc.at("replicas").get<long>();
    Check c;
    const std::vector<double> times = sample_times_from(ctx.doc, t_end, c);
    const PointPattern start = parse_pattern(ctx.doc, "start", m.phi.dim, c);
    const bool dump = ctx.doc.value("emit_trajectories", false);

    const std::size_t T = times.size();
    std::vector<long> counts(static_cast<std::size_t>(replicas) * T, 0);
    std::vector<std::array<long, 5>> counters(static_cast<std::size_t>(replicas));
    std::vector<std::string> lines(dump ? static_cast<std::size_t>(replicas) : 0);

    for_each_replica(replicas, ctx.jobs, [&](long rep) {
        CounterRng rng = replica_stream(ctx.seed, static_cast<uint64_t>(rep));
        Trajectory traj = simulate(m, start, t_end, rng);
        for (std::size_t i = 0; i < T; ++i)
            counts[static_cast<std::size_t>(rep) * T + i] = state_at(traj, times[i]).total();
        counters[static_cast<std::size_t>(rep)] = {traj.counters.candidates, traj.counters.births,
                                                   traj.counters.deaths, traj.counters.rejected,
                                                   traj.counters.ties};
        if (dump) {
            json line = {{"replica", rep},
                         {"jump_times", traj.jump_times},
                         {"final_state", pattern_json(traj.states.back())}};
            lines[static_cast<std::size_t>(rep)] = line.dump();
        }
    });

    Csv csv("t,mean_count,se,min,max");
    json series = json::array();
    for (std::size_t i = 0; i < T; ++i) {
        RunningStat st;
        long lo = counts[i], hi = counts[i];
        for (long rep = 0; rep < replicas; ++rep) {
            const long v = counts[static_cast<std::size_t>(rep) * T + i];
            st.add(static_cast<double>(v));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        csv.row({times[i], st.mean(), st.se(), static_cast<double>(lo), static_cast<double>(hi)});
        if (i + 1 == T)
            ctx.results["final"] = {{"t", times[i]}, {"mean_count", st.mean()}, {"se", st.se()}};
        series.push_back(
            {{"t", times[i]}, {"mean_count", st.mean()}, {"se", st.se()}, {"min", lo}, {"max", hi}});
    }
    std::array<long, 5> tot{};
    for (const auto& a : counters)
        for (int i = 0; i < 5; ++i) tot[static_cast<std::size_t>(i)] += a[static_cast<std::size_t>(i)];
    ctx.results["replicas"] = replicas;
    ctx.results["t_end"] = t_end;
    ctx.results["series"] = series;
    ctx.results["counters"] = {{"candidates", tot[0]},
                               {"births", tot[1]},
                               {"deaths", tot[2]},
                               {"rejected", tot[3]},
                               {"ties", tot[4]}};
    ctx.emit.write("counts.csv", csv.str());
    if (dump) {
        std::string all;
        for (auto& l : lines) {
            all += l;
            all += "\n";
        }
        ctx.emit.write("trajectories.jsonl", all);
    }
}

void run_couple(Ctx& ctx) {
    Check c;
    GibbsModel m2;
    PointPattern s1, s2;
    GibbsModel m1 = coupled_models(ctx.doc, c, m2, s1, s2);
    const double t_end = ctx.doc.at("t_end").get<double>();
    const long replicas = ctx.doc.at("replicas").get<long>();
    const std::vector<double> times = sample_times_from(ctx.doc, t_end, c);

    const std::size_t T = times.size();
    std::vector<long> fvals(static_cast<std::size_t>(replicas) * T, 0);
    std::vector<unsigned char> coal(static_cast<std::size_t>(replicas) * T, 0);

    for_each_replica(replicas, ctx.jobs, [&](long rep) {
        CounterRng rng = replica_stream(ctx.seed, static_cast<uint64_t>(rep));
        CoupledTrajectory traj = simulate_coupled(m1, m2, s1, s2, t_end, rng);
        for (std::size_t i = 0; i < T; ++i) {
            fvals[static_cast<std::size_t>(rep) * T + i] =
                disagreement_count(coupled_state_at(traj, times[i]));
            coal[static_cast<std::size_t>(rep) * T + i] = traj.coalescence_time <= times[i] ? 1 : 0;
        }
    });

    Csv csv("t,mean_f,se,coalesced_fraction");
    json series = json::array();
    std::vector<double> mean_f;
    for (std::size_t i = 0; i < T; ++i) {
        RunningStat st;
        long ncoal = 0;
        for (long rep = 0; rep < replicas; ++rep) {
            st.add(static_cast<double>(fvals[static_cast<std::size_t>(rep) * T + i]));
            ncoal += coal[static_cast<std::size_t>(rep) * T + i];
        }
        const double frac = static_cast<double>(ncoal) / static_cast<double>(replicas);
        csv.row({times[i], st.mean(), st.se(), frac});
        series.push_back(
            {{"t", times[i]}, {"mean_f", st.mean()}, {"se", st.se()}, {"coalesced_fraction", frac}});
        mean_f.push_back(st.mean());
    }
    ctx.results["replicas"] = replicas;
    ctx.results["t_end"] = t_end;
    ctx.results["series"] = series;
    if (m1.phi.kind != PotentialKind::custom) {
        const Temperedness est = weak_temperedness_constant(m1.phi, 1e-10);
        ctx.results["delta_certified"] = contraction_rate(m1, est);
    }
    try {
        ctx.results["delta_fitted"] = fitted_contraction_rate(times, mean_f);
    } catch (const std::exception&) {
        ctx.results["delta_fitted"] = nullptr; // disagreement died out too fast to fit
    }
    ctx.emit.write("coupling.csv", csv.str());
}

void run_percolate(Ctx& ctx) {
    Check c;
    const Potential phi = parse_potential(ctx.doc, c);
    const double lambda = ctx.doc.at("lambda").get<double>();
    const int n = ctx.doc.at("n").get<int>();
    const int m = static_cast<int>(integer_or(ctx.doc, "m", 0));
    const double t = ctx.doc.at("t").get<double>();
    const long replicas = ctx.doc.at("replicas").get<long>();
    const PointPattern xi = parse_pattern(ctx.doc, "boundary1", phi.dim, c);
    const PointPattern zeta = parse_pattern(ctx.doc, "boundary2", phi.dim, c);

    PercolationReport rep =
        run_percolation(n, m, phi, lambda, xi, zeta, t, replicas, ctx.seed, ctx.jobs);

    Csv csv("shell,hit_fraction");
    for (std::size_t s = 0; s < rep.profile.size(); ++s)
        csv.row({static_cast<double>(s), rep.profile[s]});
    ctx.emit.write("shells.csv", csv.str());

    ctx.results = {{"n", rep.n},
                   {"m", rep.m},
                   {"t", rep.t},
                   {"replicas", rep.replicas},
                   {"rho", rep.rho},
                   {"probability", rep.probability},
                   {"se", rep.se},
                   {"ceiling", rep.ceiling},
                   {"window_max", rep.window_max},
                   {"in_window", rep.in_window},
                   {"locality_violations", rep.locality_violations},
                   {"profile", rep.profile}};
    if (rep.locality_violations > 0) {
        ctx.exit_code = 1;
        ctx.verdict = "locality check failed: disagreements appeared without a local cause";
    } else if (rep.in_window && rep.probability > rep.ceiling + 3.0 * rep.se + 1e-12) {
        ctx.exit_code = 1;
        ctx.verdict = "spread probability exceeds the certified ceiling";
    } else if (!rep.in_window) {
        ctx.verdict = "ok (t outside the certified window; ceiling not asserted)";
    }
}

void run_spatial_mixing(Ctx& ctx) {
    Check c;
    const Potential phi = parse_potential(ctx.doc, c);
    const double lambda = ctx.doc.at("lambda").get<double>();
    const int k = ctx.doc.at("k").get<int>();
    std::vector<int> n_values;
    for (const json& e : ctx.doc.at("n_values")) n_values.push_back(e.get<int>());
    const long replicas = ctx.doc.at("replicas").get<long>();
    const BoundaryPairKind pair = pair_kind_from(ctx.doc, c);

    std::vector<SpatialMixingRow> rows =
        spatial_mixing_experiment(k, n_values, phi, lambda, pair, replicas, ctx.seed, ctx.jobs);

    Csv csv("n,t,window_lo,window_hi,epsilon,lower_bound,lower_se,restricted_disagree,"
            "restricted_se,upper_certificate,ceiling");
    json series = json::array();
    for (const SpatialMixingRow& r : rows) {
        csv.row({static_cast<double>(r.n), r.t, r.window_lo, r.window_hi, r.epsilon, r.lower_bound,
                 r.lower_se, r.restricted_disagree, r.restricted_se, r.upper_certificate,
                 r.ceiling});
        series.push_back({{"n", r.n},
                          {"t", r.t},
                          {"window_lo", r.window_lo},
                          {"window_hi", r.window_hi},
                          {"epsilon", r.epsilon},
                          {"lower_bound", r.lower_bound},
                          {"lower_se", r.lower_se},
                          {"restricted_disagree", r.restricted_disagree},
                          {"restricted_se", r.restricted_se},
                          {"upper_certificate", r.upper_certificate},
                          {"ceiling", r.ceiling},
                          {"replicas", r.replicas}});
        if (r.upper_certificate > r.ceiling + 3.0 * r.restricted_se + 1e-12 && ctx.exit_code == 0) {
            ctx.exit_code = 1;
            ctx.verdict = "upper certificate exceeds ceiling at n=" + std::to_string(r.n);
        }
    }
    ctx.results["rows"] = series;
    ctx.emit.write("mixing.csv", csv.str());
}

void run_gnz(Ctx& ctx) {
    std::vector<std::string> vios;
    GibbsModel m = model_from_config(ctx.doc, vios);
    const long samples = ctx.doc.at("samples").get<long>();
    Check c;
    const GnzStatistic stat = statistic_from(ctx.doc, m, c);
    CounterRng rng = replica_stream(ctx.seed, 0);
    const GnzResult res = gnz_residual(m, stat, samples, rng);
    ctx.results = {{"statistic", stat.name()},
                   {"samples", res.samples},
                   {"lhs", res.lhs},
                   {"rhs", res.rhs},
                   {"lhs_se", res.lhs_se},
                   {"rhs_se", res.rhs_se},
                   {"ci", 3.0 * res.diff_se},
                   {"z", res.z}};
    if (!(std::abs(res.z) <= 3.0)) {
        ctx.exit_code = 1;
        ctx.verdict = "balance identity violated at 3 sigma (z=" + fmt_g(res.z) + ")";
    }
}

void run_threshold(Ctx& ctx) {
    Check c;
    const Potential phi = parse_potential(ctx.doc, c);
    const double tol = number_or(ctx.doc, "tolerance", 1e-9);
    const Temperedness est = weak_temperedness_constant(phi, tol);
    ctx.results = {{"c_hat", est.c_hat},
                   {"c_full", est.c_full},
                   {"abs_error", est.abs_error},
                   {"method", est.method == Temperedness::Method::quadrature ? "quadrature" : "mc"},
                   {"lambda_star", uniqueness_threshold(phi, est)},
                   {"lambda_penrose_ruelle", penrose_ruelle_threshold(phi, est)}};
}

void run_oracle(Ctx& ctx) {
    std::vector<std::string> vios;
    GibbsModel m = model_from_config(ctx.doc, vios);
    const int cells = ctx.doc.at("cells").get<int>();
    const long cap = integer_or(ctx.doc, "max_occupancy", 1);
    const DiscretizedInstance inst = discretize(m, cells, cap);
    const DiscreteChain chain = exact_stationary(inst);

    json states = json::array();
    for (std::size_t s = 0; s < inst.states.size(); ++s)
        states.push_back({{"occupancy", inst.states[s]}, {"pi", chain.pi(static_cast<long>(s))}});
    const json pi_doc = {{"cells_per_dim", cells},
                         {"max_occupancy", cap},
                         {"state_count", inst.states.size()},
                         {"full_state_count", inst.full_state_count()},
                         {"restricted", inst.restricted()},
                         {"pq_residual", chain.pq_residual},
                         {"closed_form_rel_error", chain.closed_form_rel_error},
                         {"states", states}};
    ctx.emit.write_json("pi.json", pi_doc);
    ctx.results = {{"state_count", inst.states.size()},
                   {"restricted", inst.restricted()},
                   {"pq_residual", chain.pq_residual},
                   {"closed_form_rel_error", chain.closed_form_rel_error}};

    if (const json* cmp = child(ctx.doc, "compare")) {
        const OracleComparison oc =
            compare_to_simulation(inst, chain, cmp->at("runs").get<long>(), cmp->at("t").get<double>(),
                                  cmp->value("tolerance", 0.05), ctx.seed, ctx.jobs);
        const json cmp_doc = {{"samples", oc.samples},
                              {"t", oc.t},
                              {"tv", oc.tv},
                              {"chi2_stat", oc.chi2_stat},
                              {"chi2_p", oc.chi2_p},
                              {"off_support_mass", oc.off_support_mass},
                              {"discretization_term", oc.discretization_term},
                              {"tolerance", oc.tolerance},
                              {"pass", oc.pass}};
        ctx.emit.write_json("comparison.json", cmp_doc);
        ctx.results["comparison"] = cmp_doc;
        if (!oc.pass) {
            ctx.exit_code = 1;
            ctx.verdict = "simulated occupancy law drifted from the exact stationary law";
        }
    }
}

void run_partition(Ctx& ctx) {
    std::vector<std::string> vios;
    GibbsModel m = model_from_config(ctx.doc, vios);
    const std::string method = string_or(ctx.doc, "method", "series");
    CounterRng rng = replica_stream(ctx.seed, 0);
    Estimate est;
    if (method == "series")
        est = partition_function_series(m, integer_or(ctx.doc, "n_max", 40),
                                        integer_or(ctx.doc, "samples_per_term", 20000),
                                        number_or(ctx.doc, "err_request", 1e-3), rng);
    else
        est = partition_function_mc(m, integer_or(ctx.doc, "samples", 200000), rng);
    ctx.results = {{"method", method}, {"value", est.value}, {"error", est.error}};
}

} // namespace

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    ExperimentConfig cfg;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json parsed = json::parse(text, nullptr, false);
        if (parsed.is_discarded()) throw ConfigError("config: invalid JSON");
        cfg.doc = std::move(parsed);
    } else {
        cfg.doc = parse_block_config(text);
    }
    if (!cfg.doc.is_object()) throw ConfigError("config: top level must be an object");
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

std::string ExperimentConfig::kind() const {
    const json* k = child(doc, "kind");
    return k && k->is_string() ? k->get<std::string>() : "";
}

void ExperimentConfig::validate() const {
    Check c;
    const std::string k = kind();
    const auto& kinds = known_kinds();
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) {
        std::string list;
        for (const auto& s : kinds) list += (list.empty() ? "" : " | ") + s;
        c.fail("kind: expected one of " + list);
    }
    const json* seed = child(doc, "seed");
    if (!seed || !seed->is_number_integer() || seed->get<long long>() < 0)
        c.fail("seed: required non-negative integer (no wall-clock seeding)");
    const std::string fmt = string_or(doc, "format", "json");
    if (fmt != "json" && fmt != "compact") c.fail("format: expected json | compact");
    if (!c.v.empty() && std::find(kinds.begin(), kinds.end(), k) == kinds.end()) {
        // without a kind there is nothing further to check
    } else if (std::find(kinds.begin(), kinds.end(), k) != kinds.end()) {
        validate_kind(k, doc, c);
    }
    if (!c.v.empty()) {
        std::string msg = "invalid experiment config:";
        for (const auto& v : c.v) msg += "\n  - " + v;
        throw ConfigError(msg);
    }
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int jobs) {
    cfg.validate();
    const std::string started = iso_now();
    const auto t0 = std::chrono::steady_clock::now();

    std::filesystem::create_directories(out_dir);
    RunResult result;
    Ctx ctx{cfg.doc, static_cast<uint64_t>(cfg.doc.at("seed").get<long long>()),
            jobs < 1 ? 1 : jobs,
            Emitter{out_dir, &result, string_or(cfg.doc, "format", "json") == "compact"}};

    const std::string k = cfg.kind();
    if (k == "simulate")
        run_simulate(ctx);
    else if (k == "couple")
        run_couple(ctx);
    else if (k == "percolate")
        run_percolate(ctx);
    else if (k == "spatial-mixing")
        run_spatial_mixing(ctx);
    else if (k == "gnz-check")
        run_gnz(ctx);
    else if (k == "threshold")
        run_threshold(ctx);
    else if (k == "oracle")
        run_oracle(ctx);
    else
        run_partition(ctx);

    const json report = {{"version", version_tag},
                         {"kind", k},
                         {"verdict", ctx.verdict},
                         {"config", cfg.doc},
                         {"results", ctx.results}};
    ctx.emit.write_json("report.json", report);

    const auto t1 = std::chrono::steady_clock::now();
    const json meta = {
        {"started_at", started},
        {"finished_at", iso_now()},
        {"elapsed_seconds", std::chrono::duration<double>(t1 - t0).count()}};
    ctx.emit.write_json("meta.json", meta);

    result.exit_code = ctx.exit_code;
    result.verdict = ctx.verdict;
    return result;
}

} // namespace sbd
