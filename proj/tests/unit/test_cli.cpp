#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome run(const std::string& args) {
    const std::string command = std::string(ILLS_CLI_PATH) + " " + args + " 2>/dev/null";
    Outcome o;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) o.out.append(buf, n);
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path ratings_file() {
    const auto path = fs::temp_directory_path() / "ills_cli_ratings.tsv";
    std::ofstream out(path);
    std::mt19937_64 gen(23);
    std::bernoulli_distribution coin(0.2);
    std::uniform_int_distribution<int> stars(1, 5);
    for (int u = 1; u <= 30; ++u)
        for (int i = 1; i <= 50; ++i)
            if (coin(gen)) out << u << '\t' << i << '\t' << stars(gen) << '\n';
    return path;
}

std::string tmp(const std::string& name) {
    const auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p.string();
}

}  // namespace

TEST_CASE("run prints the report and writes the output files") {
    const auto input = ratings_file().string();
    const auto out = tmp("ills_cli_run");
    const auto r = run("run -q --input " + input + " --mode probs-only --lists 3,5 --out " + out);
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["config"]["mode"] == "probs-only");
    CHECK(j["precision"].contains("5"));
    CHECK(slurp(fs::path(out) / "report.json") == r.out);
    CHECK(fs::exists(fs::path(out) / "metrics.csv"));
    CHECK(fs::exists(fs::path(out) / "trace.json"));
}

TEST_CASE("flags override the config file") {
    const auto input = ratings_file().string();
    const auto cfg = fs::temp_directory_path() / "ills_cli_config.json";
    std::ofstream(cfg) << R"({"input": ")" << input << R"(", "mode": "probs-only", "seed": 3, "lists": [4]})";
    const auto out = tmp("ills_cli_cfg");
    const auto r = run("run -q --config " + cfg.string() + " --seed 9 --out " + out);
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["config"]["seed"] == 9);
    CHECK(j["precision"].contains("4"));
}

TEST_CASE("identical runs give identical bytes") {
    const auto input = ratings_file().string();
    const auto a = tmp("ills_cli_det_a");
    const auto b = tmp("ills_cli_det_b");
    const std::string common = "run -q --input " + input + " --mode ills --k-grid 0.2,0.5 --mask-fraction 0.05 --out ";
    REQUIRE(run(common + a).code == 0);
    REQUIRE(run(common + b).code == 0);
    for (const char* name : {"report.json", "metrics.csv", "trace.json"}) {
        CHECK(slurp(fs::path(a) / name) == slurp(fs::path(b) / name));
    }
}

TEST_CASE("split, sweep-k and stats subcommands") {
    const auto input = ratings_file().string();
    const auto split = tmp("ills_cli_split");
    REQUIRE(run("split --input " + input + " --out " + split).code == 0);
    CHECK(fs::exists(fs::path(split) / "train.txt"));
    CHECK(fs::exists(fs::path(split) / "probe.txt"));
    CHECK(fs::exists(fs::path(split) / "split.json"));

    const auto sweep = tmp("ills_cli_sweep");
    const auto s = run("sweep-k -q --input " + input + " --k-grid 0.1,0.3 --mask-fraction 0.05 --out " + sweep);
    REQUIRE(s.code == 0);
    CHECK(s.out.rfind("K,K_fraction,NRMSE\n", 0) == 0);
    CHECK(slurp(fs::path(sweep) / "sweep_k.csv") == s.out);

    const auto stats = tmp("ills_cli_stats");
    const auto st = run("stats --input " + input + " --out " + stats);
    REQUIRE(st.code == 0);
    CHECK(nlohmann::json::parse(st.out)["users"].get<int>() > 0);
}

TEST_CASE("exit codes") {
    const auto input = ratings_file().string();
    CHECK(run("").code == 1);
    CHECK(run("run --bogus").code == 1);
    CHECK(run("run --input " + input + " --mode heats").code == 1);
    CHECK(run("run --input " + input + " --ratio 1.5").code == 1);
    CHECK(run("run --input /nonexistent/file.tsv --out " + tmp("ills_cli_missing")).code == 2);

    const auto bad = fs::temp_directory_path() / "ills_cli_bad.tsv";
    std::ofstream(bad) << "1\t2\t5\n1\t3\n";
    CHECK(run("run --input " + bad.string() + " --out " + tmp("ills_cli_bad")).code == 2);
}
