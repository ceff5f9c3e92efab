// branchcount: drive the library's verifications from the command line with
// machine-readable output.
//
// Exit codes: 0 all checks pass, 1 bad input, 2 a check failed.
// Output is deterministic for identical (command, flags, seed); floats are
// rounded to 12 significant digits before serialization.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "branchcount/eprb.hpp"
#include "branchcount/event_space.hpp"
#include "branchcount/microprob.hpp"

using nlohmann::json;
namespace bc = branchcount;

namespace {

std::string fmt12(double x) {
    if (std::isnan(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

double sig12(double x) { return x; }  // floats are formatted at emission

double to_radians(double degrees) { return degrees * M_PI / 180.0; }

// nlohmann's dump() prints shortest-roundtrip doubles; the output contract
// wants exactly 12 significant digits, so serialization is done by hand.
void write_json(std::ostream& os, const json& j, int depth) {
    const std::string pad(static_cast<size_t>(depth) * 2, ' ');
    const std::string pad_in(static_cast<size_t>(depth + 1) * 2, ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) { os << "{}"; return; }
            os << "{\n";
            bool first = true;
            for (auto it = j.cbegin(); it != j.cend(); ++it) {
                if (!first) os << ",\n";
                first = false;
                os << pad_in << json(it.key()).dump() << ": ";
                write_json(os, it.value(), depth + 1);
            }
            os << "\n" << pad << "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) { os << "[]"; return; }
            os << "[\n";
            bool first = true;
            for (const auto& el : j) {
                if (!first) os << ",\n";
                first = false;
                os << pad_in;
                write_json(os, el, depth + 1);
            }
            os << "\n" << pad << "]";
            return;
        }
        case json::value_t::number_float:
            os << fmt12(j.get<double>());
            return;
        default:
            os << j.dump();
            return;
    }
}

void emit(const json& j) {
    write_json(std::cout, j, 0);
    std::cout << "\n";
}

bc::StateVector load_state_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw bc::Error("cannot open state file: " + path);
    json j = json::parse(in);
    if (!j.is_array() || j.empty()) throw bc::Error("state file must be a non-empty array");
    bc::Vec v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const auto& entry : j) {
        if (!entry.is_array() || entry.size() != 2)
            throw bc::Error("state file entries must be [re, im] pairs");
        v(i++) = bc::Complex(entry[0].get<double>(), entry[1].get<double>());
    }
    return bc::StateVector(std::move(v));
}

struct ExpandArgs {
    Eigen::Index dim = 0;
    Eigen::Index n = 0;
    std::uint64_t seed = 0;
    std::string state_file;
};

int cmd_expand(const ExpandArgs& args, const bc::Tolerance& tol) {
    bc::Rng master(args.seed);
    bc::StateVector psi;
    if (!args.state_file.empty()) {
        psi = load_state_file(args.state_file);
        if (args.dim > 0 && args.dim != psi.dim())
            throw bc::Error("--dim disagrees with the state file length");
    } else {
        if (args.dim < 1) throw bc::Error("--dim is required without --state-file");
        psi = bc::gaussian_state(args.dim, master);
    }
    bc::Expansion lam = bc::construct(psi, args.n, master());
    bc::ValidationReport rep = bc::validate(lam, tol);

    json out;
    out["n"] = lam.n;
    json thetas = json::array();
    for (double t : lam.theta_log) thetas.push_back(sig12(t));
    out["theta_log"] = std::move(thetas);
    out["checks"] = {{"orthogonality", rep.orthogonality_ok},
                     {"equiamplitude", rep.equiamplitude_ok},
                     {"completeness", rep.completeness_ok}};
    out["max_violation"] = sig12(rep.max_violation());
    emit(out);
    return rep.pass() ? 0 : 2;
}

struct SwapArgs {
    Eigen::Index dim = 0;
    Eigen::Index n = 0;
    int i = 0;
    int j = 0;
    std::uint64_t seed = 0;
};

int cmd_swap(const SwapArgs& args, const bc::Tolerance& tol) {
    if (args.dim < args.n + 1)
        throw bc::Error("swap needs dim >= n + 1 for the auxiliary direction");
    bc::Rng master(args.seed);
    bc::StateVector psi = bc::gaussian_state(args.dim, master);
    bc::Expansion lam = bc::construct(psi, args.n, master());

    double residual = 0.0;
    double za = 1.0, zb = 1.0;
    if (args.n > 1) {
        bc::SwapTriple triple = bc::build_swap_triple(lam, args.i, args.j, master());
        bc::StateVector roundtrip =
            triple.U_c.apply(triple.U_b.apply(triple.U_a.apply(psi)));
        residual = (roundtrip - psi).norm() / psi.norm();
        za = std::abs(triple.z_a);
        zb = std::abs(triple.z_b);
    }
    bc::EqualityClasses eq = bc::forced_equalities(lam, master());
    bool single_class = eq.classes.size() == 1 &&
                        static_cast<Eigen::Index>(eq.classes[0].size()) == lam.n;

    json out;
    out["n"] = lam.n;
    out["i"] = args.i;
    out["j"] = args.j;
    out["residual"] = sig12(residual);
    out["z_a_abs"] = sig12(za);
    out["z_b_abs"] = sig12(zb);
    out["classes"] = eq.classes;
    json mu = json::array();
    for (double m : eq.mu) mu.push_back(sig12(m));
    out["mu"] = std::move(mu);
    out["nullity"] = eq.nullity;
    out["single_class"] = single_class;
    emit(out);
    return (single_class && residual <= tol.rel) ? 0 : 2;
}

struct ProbArgs {
    Eigen::Index dim = 0;
    Eigen::Index n = 0;
    Eigen::Index rank = 0;
    std::uint64_t seed = 0;
    std::vector<Eigen::Index> grid;
    std::string format = "json";
};

json prob_row(const bc::ConvergeRow& row) {
    return {{"n", row.n},
            {"m", row.m},
            {"cats", row.cats},
            {"fraction", sig12(row.fraction)},
            {"lo", sig12(row.lo)},
            {"hi", sig12(row.hi)},
            {"born", sig12(row.born)},
            {"error", sig12(row.error)},
            {"bound", sig12(1.0 / static_cast<double>(row.n))}};
}

int cmd_prob(const ProbArgs& args) {
    bc::Rng master(args.seed);
    bc::StateVector psi = bc::gaussian_state(args.dim, master);
    bc::ProjectorOp p = bc::random_projector(args.dim, args.rank, master);

    std::vector<Eigen::Index> grid = args.grid.empty()
                                         ? std::vector<Eigen::Index>{args.n}
                                         : args.grid;
    std::vector<bc::ConvergeRow> rows = bc::converge(p, psi, grid, master());
    auto [pu, psiu] = bc::ensure_capacity(p, psi, grid.back());
    bool uniq = bc::uniqueness_check(pu, psiu, grid.back(), 5, master());
    bool within = true;
    for (const auto& row : rows)
        if (!(row.error < 1.0 / static_cast<double>(row.n))) within = false;

    if (args.format == "csv") {
        if (args.grid.empty()) throw bc::Error("--format csv applies to --grid tables");
        std::cout << "n,m,cats,fraction,lo,hi,born,error,bound\n";
        for (const auto& row : rows)
            std::cout << row.n << "," << row.m << "," << row.cats << ","
                      << fmt12(row.fraction) << "," << fmt12(row.lo) << "," << fmt12(row.hi)
                      << "," << fmt12(row.born) << "," << fmt12(row.error) << ","
                      << fmt12(1.0 / static_cast<double>(row.n)) << "\n";
    } else if (args.grid.empty()) {
        json out = prob_row(rows[0]);
        out["dim"] = args.dim;
        out["projector_rank"] = args.rank;
        out["uniqueness"] = uniq;
        emit(out);
    } else {
        json out;
        out["dim"] = args.dim;
        out["projector_rank"] = args.rank;
        json jr = json::array();
        for (const auto& row : rows) jr.push_back(prob_row(row));
        out["rows"] = std::move(jr);
        out["uniqueness"] = uniq;
        emit(out);
    }
    return (within && uniq) ? 0 : 2;
}

struct EprbArgs {
    std::string state = "singlet";
    std::string check = "chsh";
    double a = 0.0, aprime = 90.0, b = 45.0, bprime = 135.0;  // degrees
    Eigen::Index n = 100;
    Eigen::Index pad = 16;
    std::uint64_t seed = 0;
    std::string format = "json";
};

int cmd_eprb(const EprbArgs& args, const bc::Tolerance& tol) {
    if (args.state != "singlet" && args.state != "product")
        throw bc::Error("--state must be singlet or product");
    bc::Rng master(args.seed);
    bc::StateVector phi2, chi2;
    bc::EprbScenario sc;
    sc.pad_a = args.pad;
    sc.pad_b = args.pad;
    sc.a = {to_radians(args.a)};
    sc.aprime = {to_radians(args.aprime)};
    sc.b = {to_radians(args.b)};
    sc.bprime = {to_radians(args.bprime)};
    sc.n = args.n;
    sc.seed = master();
    if (args.state == "singlet") {
        sc.state = bc::singlet(args.pad);
    } else {
        phi2 = bc::gaussian_state(2, master).normalized();
        chi2 = bc::gaussian_state(2, master).normalized();
        sc.state = bc::product_state(phi2, chi2, args.pad, args.pad);
    }

    json out;
    out["state"] = args.state;
    out["check"] = args.check;
    out["n"] = sc.n;
    out["pad"] = args.pad;

    if (args.check == "table") {
        bc::JointTable jt = bc::joint_table(sc, sc.a, sc.b);
        if (args.format == "csv") {
            std::cout << "s,t,m,born,lo,hi\n";
            for (int s = 0; s < 2; ++s)
                for (int t = 0; t < 2; ++t)
                    std::cout << (s == 0 ? 1 : -1) << "," << (t == 0 ? 1 : -1) << ","
                              << jt.cells[s][t].m << "," << fmt12(jt.cells[s][t].born) << ","
                              << fmt12(jt.cells[s][t].lo) << "," << fmt12(jt.cells[s][t].hi)
                              << "\n";
        } else {
            json cells = json::array();
            for (int s = 0; s < 2; ++s)
                for (int t = 0; t < 2; ++t)
                    cells.push_back({{"s", s == 0 ? 1 : -1},
                                     {"t", t == 0 ? 1 : -1},
                                     {"m", jt.cells[s][t].m},
                                     {"born", sig12(jt.cells[s][t].born)},
                                     {"lo", sig12(jt.cells[s][t].lo)},
                                     {"hi", sig12(jt.cells[s][t].hi)}});
            out["cats"] = jt.cats;
            out["cells"] = std::move(cells);
            out["born_marginal_a"] = {sig12(jt.born_marginal_a[0]),
                                      sig12(jt.born_marginal_a[1])};
            out["born_marginal_b"] = {sig12(jt.born_marginal_b[0]),
                                      sig12(jt.born_marginal_b[1])};
            out["count_marginal_a"] = {jt.count_marginal_a[0], jt.count_marginal_a[1]};
            out["count_marginal_b"] = {jt.count_marginal_b[0], jt.count_marginal_b[1]};
            out["born_sum"] = sig12(jt.born_sum());
            out["count_sum"] = sig12(jt.count_sum());
            emit(out);
        }
        bool ok = std::abs(jt.born_sum() - 1.0) <= tol.scaled(1.0);
        for (int s = 0; s < 2 && ok; ++s)
            for (int t = 0; t < 2 && ok; ++t) {
                const auto& c = jt.cells[s][t];
                ok = c.born >= c.lo - 1e-9 && c.born <= c.hi + 1e-9;
            }
        return ok ? 0 : 2;
    }
    if (args.format == "csv") throw bc::Error("--format csv applies to tables");

    if (args.check == "pi") {
        bc::ParameterIndependenceReport rep = bc::parameter_independence(sc);
        out["born_under_b"] = {sig12(rep.born_under_b[0]), sig12(rep.born_under_b[1])};
        out["born_under_bprime"] = {sig12(rep.born_under_bprime[0]),
                                    sig12(rep.born_under_bprime[1])};
        out["born_binary"] = {sig12(rep.born_binary[0]), sig12(rep.born_binary[1])};
        out["m_base"] = {rep.m_base[0], rep.m_base[1]};
        out["m_under_b"] = {rep.m_under_b[0], rep.m_under_b[1]};
        out["m_under_bprime"] = {rep.m_under_bprime[0], rep.m_under_bprime[1]};
        out["max_born_dev"] = sig12(rep.max_born_dev);
        out["counts_equal"] = rep.counts_equal;
        bool ok = rep.counts_equal && rep.max_born_dev <= tol.rel;
        out["pass"] = ok;
        emit(out);
        return ok ? 0 : 2;
    }
    if (args.check == "oi") {
        bc::OutcomeIndependenceReport rep = bc::outcome_independence(sc, sc.a, sc.b);
        bool factorizing = rep.max_factor_dev <= tol.rel;
        out["joint"] = {{sig12(rep.joint[0][0]), sig12(rep.joint[0][1])},
                        {sig12(rep.joint[1][0]), sig12(rep.joint[1][1])}};
        out["marginal_a"] = {sig12(rep.marginal_a[0]), sig12(rep.marginal_a[1])};
        out["marginal_b"] = {sig12(rep.marginal_b[0]), sig12(rep.marginal_b[1])};
        out["max_factor_dev"] = sig12(rep.max_factor_dev);
        out["factorizing"] = factorizing;
        out["conditional"] = {{sig12(rep.conditional[0][0]), sig12(rep.conditional[0][1])},
                              {sig12(rep.conditional[1][0]), sig12(rep.conditional[1][1])}};
        out["max_conditional_dev"] = sig12(rep.max_conditional_dev);
        bool expected = args.state == "product";
        out["expected_factorizing"] = expected;
        emit(out);
        return factorizing == expected ? 0 : 2;
    }
    if (args.check == "chsh") {
        bc::ChshReport rep = bc::chsh(sc);
        out["born_e"] = {sig12(rep.born_e[0]), sig12(rep.born_e[1]), sig12(rep.born_e[2]),
                         sig12(rep.born_e[3])};
        out["count_e"] = {sig12(rep.count_e[0]), sig12(rep.count_e[1]), sig12(rep.count_e[2]),
                          sig12(rep.count_e[3])};
        out["born_s"] = sig12(rep.born_s);
        out["count_s"] = sig12(rep.count_s);
        out["bound"] = sig12(rep.bound);
        out["classical"] = sig12(rep.classical);
        bool ok = std::abs(rep.count_s - rep.born_s) <= rep.bound;
        out["pass"] = ok;
        emit(out);
        return ok ? 0 : 2;
    }
    if (args.check == "product-count") {
        if (args.state != "product")
            throw bc::Error("product-count requires --state product");
        bc::ProductCountingReport rep =
            bc::product_counting(bc::embed_local(phi2, args.pad), bc::embed_local(chi2, args.pad),
                                 sc.a, sc.b, args.n, args.n, master());
        out["n_a"] = rep.n_a;
        out["m_a"] = rep.m_a;
        out["n_b"] = rep.n_b;
        out["m_b"] = rep.m_b;
        out["joint_count"] = rep.joint_count;
        out["p_joint"] = sig12(rep.p_joint);
        out["p_product"] = sig12(rep.p_product);
        out["exact"] = rep.exact;
        out["families"] = {{rep.families[0][0], rep.families[0][1]},
                           {rep.families[1][0], rep.families[1][1]}};
        out["families_partition_ok"] = rep.families_partition_ok;
        out["expansion_ok"] = rep.product_expansion.pass();
        out["max_eigen_dev"] = sig12(rep.max_eigen_dev);
        bool ok = rep.exact && rep.families_partition_ok && rep.product_expansion.pass();
        emit(out);
        return ok ? 0 : 2;
    }
    throw bc::Error("--check must be pi, oi, chsh, table, or product-count");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"microstate counting probability toolkit"};
    app.require_subcommand(1);

    double tol_flag = 0.0;
    app.add_option("--tol", tol_flag, "relative tolerance override (wins over BRANCHCOUNT_TOL)");

    ExpandArgs ex;
    CLI::App* expand = app.add_subcommand("expand", "build and validate an expansion");
    expand->add_option("--dim", ex.dim, "ambient dimension");
    expand->add_option("--n", ex.n, "number of microstates")->required();
    expand->add_option("--seed", ex.seed, "rng seed")->required();
    expand->add_option("--state-file", ex.state_file, "JSON array of [re, im] pairs");

    SwapArgs sw;
    CLI::App* swap = app.add_subcommand("swap", "swap-triple and forced equalities");
    swap->add_option("--dim", sw.dim, "ambient dimension")->required();
    swap->add_option("--n", sw.n, "number of microstates")->required();
    swap->add_option("--i", sw.i, "first microstate index")->required();
    swap->add_option("--j", sw.j, "second microstate index")->required();
    swap->add_option("--seed", sw.seed, "rng seed")->required();

    ProbArgs pr;
    CLI::App* prob = app.add_subcommand("prob", "branch-count a random projector");
    prob->add_option("--dim", pr.dim, "ambient dimension")->required();
    prob->add_option("--n", pr.n, "ensemble size");
    prob->add_option("--projector-rank", pr.rank, "rank of the random projector")->required();
    prob->add_option("--seed", pr.seed, "rng seed")->required();
    prob->add_option("--grid", pr.grid, "comma-separated n values")->delimiter(',');
    prob->add_option("--format", pr.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    EprbArgs ep;
    CLI::App* eprb = app.add_subcommand("eprb", "two-party counting checks");
    eprb->add_option("--state", ep.state, "singlet or product");
    eprb->add_option("--check", ep.check, "pi, oi, chsh, table, or product-count");
    eprb->add_option("--a", ep.a, "Alice setting, degrees");
    eprb->add_option("--aprime", ep.aprime, "Alice alternate setting, degrees");
    eprb->add_option("--b", ep.b, "Bob setting, degrees");
    eprb->add_option("--bprime", ep.bprime, "Bob alternate setting, degrees");
    eprb->add_option("--n", ep.n, "ensemble size");
    eprb->add_option("--pad", ep.pad, "zero-amplitude pad per side");
    eprb->add_option("--seed", ep.seed, "rng seed")->required();
    eprb->add_option("--format", ep.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints the message or the help text
        return code == 0 ? 0 : 1;
    }

    bc::Tolerance tol;
    if (const char* env = std::getenv("BRANCHCOUNT_TOL")) {
        double v = std::strtod(env, nullptr);
        if (v > 0.0) tol.rel = v;
    }
    if (app.count("--tol") > 0) {
        if (tol_flag <= 0.0) {
            std::cerr << "error: --tol must be positive\n";
            return 1;
        }
        tol.rel = tol_flag;
    }

    try {
        if (*expand) return cmd_expand(ex, tol);
        if (*swap) return cmd_swap(sw, tol);
        if (*prob) return cmd_prob(pr);
        if (*eprb) return cmd_eprb(ep, tol);
    } catch (const bc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
