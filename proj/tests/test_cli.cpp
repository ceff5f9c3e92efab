#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <json.hpp>
#include <string>

// CLI_BIN is injected by the build; every command here runs the real binary.

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    std::string cmd = std::string(CLI_BIN) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 4096> buf;
    size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

nlohmann::json parse(const RunResult& r) {
    REQUIRE_FALSE(r.out.empty());
    return nlohmann::json::parse(r.out);
}

}  // namespace

TEST_CASE("expand emits passing checks and the angle log") {
    RunResult r = run("expand --dim 8 --n 8 --seed 1");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    CHECK(j["n"] == 8);
    CHECK(j["theta_log"].size() == 7);
    CHECK(j["checks"]["orthogonality"] == true);
    CHECK(j["checks"]["equiamplitude"] == true);
    CHECK(j["checks"]["completeness"] == true);
    CHECK(j["max_violation"].get<double>() <= 1e-10);
    CHECK(j["theta_log"][0].get<double>() == doctest::Approx(M_PI / 4).epsilon(1e-11));
}

TEST_CASE("expand distinguishes bad input from a failed validation") {
    CHECK(run("expand --dim 4 --n 8 --seed 1").exit_code == 1);
    CHECK(run("expand --dim 2 --n 2 --seed 1").exit_code == 0);
    CHECK(run("expand --n 2 --seed 1").exit_code == 1);       // no dim, no state file
    CHECK(run("expand --dim 8 --seed 1").exit_code == 1);     // missing required --n
    CHECK(run("bogus-subcommand").exit_code == 1);
}

TEST_CASE("swap reports the composite residual and a single class") {
    RunResult r = run("swap --dim 8 --n 4 --i 0 --j 1 --seed 3");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    CHECK(j["residual"].get<double>() <= 1e-10);
    CHECK(j["single_class"] == true);
    CHECK(j["classes"].size() == 1);
    CHECK(j["classes"][0].size() == 4);
    CHECK(j["nullity"] == 0);
    for (const auto& v : j["mu"]) CHECK(v.get<double>() == doctest::Approx(0.25).epsilon(1e-8));

    CHECK(run("swap --dim 8 --n 4 --i 2 --j 2 --seed 3").exit_code == 1);
    CHECK(run("swap --dim 4 --n 4 --i 0 --j 1 --seed 3").exit_code == 1);  // no spare direction
    CHECK(run("swap --dim 4 --n 1 --i 0 --j 0 --seed 3").exit_code == 0);  // trivial single class
}

TEST_CASE("prob intervals contain the born weight") {
    RunResult r = run("prob --dim 64 --n 32 --projector-rank 20 --seed 5");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    double born = j["born"].get<double>();
    CHECK(j["lo"].get<double>() <= born + 1e-9);
    CHECK(born <= j["hi"].get<double>() + 1e-9);
    CHECK(j["error"].get<double>() < j["bound"].get<double>());
    CHECK(j["uniqueness"] == true);
    CHECK(j["m"].get<long>() * 32 == doctest::Approx(j["fraction"].get<double>() * 32 * 32));

    RunResult zero = run("prob --dim 16 --n 8 --projector-rank 0 --seed 2");
    CHECK(zero.exit_code == 0);
    auto jz = parse(zero);
    CHECK(jz["born"].get<double>() == 0.0);
    CHECK(jz["m"] == 0);
}

TEST_CASE("prob grid tightens like 1/n in both output formats") {
    RunResult r = run("prob --dim 64 --projector-rank 20 --seed 5 --grid 4,16,64");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    REQUIRE(j["rows"].size() == 3);
    double bounds[3] = {0.25, 0.0625, 0.015625};
    for (int k = 0; k < 3; ++k)
        CHECK(j["rows"][k]["error"].get<double>() < bounds[k]);

    RunResult csv = run("prob --dim 64 --projector-rank 20 --seed 5 --grid 4,16,64 --format csv");
    CHECK(csv.exit_code == 0);
    CHECK(csv.out.rfind("n,m,cats,fraction,lo,hi,born,error,bound\n", 0) == 0);
    CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 4);

    // csv is a table format; single rows stay json
    CHECK(run("prob --dim 64 --n 8 --projector-rank 20 --seed 5 --format csv").exit_code == 1);
}

TEST_CASE("eprb chsh hits the quantum value with twelve digit output") {
    RunResult r = run(
        "eprb --state singlet --a 0 --aprime 90 --b 45 --bprime 135 --check chsh "
        "--n 1000 --pad 64 --seed 7");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    CHECK(j["born_s"].get<double>() == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-6));
    CHECK(std::abs(j["count_s"].get<double>() - j["born_s"].get<double>()) <=
          j["bound"].get<double>());
    // 12 significant digits, verbatim
    CHECK(r.out.find("2.82842712475") != std::string::npos);
}

TEST_CASE("eprb table at equal settings shows exact anticorrelation") {
    RunResult r = run("eprb --state singlet --a 0 --b 0 --check table --n 100 --pad 16 --seed 4");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    bool found_pp = false;
    for (const auto& cell : j["cells"])
        if (cell["s"] == 1 && cell["t"] == 1) {
            found_pp = true;
            CHECK(cell["born"].get<double>() == 0.0);
            CHECK(cell["m"] == 0);
        }
    CHECK(found_pp);
    CHECK(j["born_sum"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("eprb oi classifies by state type") {
    RunResult prod = run("eprb --state product --check oi --a 10 --b 70 --n 20 --pad 8 --seed 2");
    CHECK(prod.exit_code == 0);
    auto j = parse(prod);
    CHECK(j["factorizing"] == true);

    RunResult sing = run("eprb --state singlet --check oi --a 10 --b 70 --n 20 --pad 8 --seed 2");
    CHECK(sing.exit_code == 0);
    CHECK(parse(sing)["factorizing"] == false);
}

TEST_CASE("eprb pi keeps alice's counts fixed") {
    RunResult r = run("eprb --state singlet --check pi --b 30 --bprime 100 --n 64 --pad 8 --seed 11");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    CHECK(j["counts_equal"] == true);
    CHECK(j["m_base"] == j["m_under_b"]);
    CHECK(j["m_base"] == j["m_under_bprime"]);
}

TEST_CASE("eprb product-count multiplies marginal fractions") {
    RunResult r = run("eprb --state product --check product-count --a 25 --b 70 --n 10 --pad 20 --seed 6");
    CHECK(r.exit_code == 0);
    auto j = parse(r);
    CHECK(j["exact"] == true);
    CHECK(j["families_partition_ok"] == true);
    long total = 0;
    for (const auto& row : j["families"])
        for (const auto& v : row) total += v.get<long>();
    CHECK(total == 100);

    CHECK(run("eprb --state singlet --check product-count --n 10 --pad 20 --seed 6").exit_code == 1);
}

TEST_CASE("identical invocations produce byte-identical output") {
    const std::string cmd = "eprb --state singlet --check chsh --n 100 --pad 16 --seed 7";
    RunResult a = run(cmd);
    RunResult b = run(cmd);
    CHECK(a.exit_code == 0);
    CHECK(a.out == b.out);

    RunResult c = run("prob --dim 32 --n 16 --projector-rank 9 --seed 13");
    RunResult d = run("prob --dim 32 --n 16 --projector-rank 9 --seed 13");
    CHECK(c.out == d.out);
}

namespace {

int exit_of(const std::string& full_cmd) {
    std::string cmd = full_cmd + " > /dev/null 2>&1; echo $?";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char line[16] = {0};
    REQUIRE(fgets(line, sizeof line, pipe) != nullptr);
    pclose(pipe);
    return std::atoi(line);
}

}  // namespace

TEST_CASE("tolerance overrides come from the environment unless the flag wins") {
    const std::string swap_cmd = " swap --dim 8 --n 4 --i 0 --j 1 --seed 3";
    CHECK(exit_of(CLI_BIN + swap_cmd) == 0);
    // a hostile tolerance turns the same passing run into a failed check
    CHECK(exit_of("BRANCHCOUNT_TOL=1e-20 " + std::string(CLI_BIN) + swap_cmd) == 2);
    // the flag out-ranks the environment
    CHECK(exit_of("BRANCHCOUNT_TOL=1e-20 " + std::string(CLI_BIN) + " --tol 1e-10" + swap_cmd) ==
          0);
}
