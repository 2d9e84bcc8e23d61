#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

const std::string kBin = MISSARF_BIN;
const std::string kDir = "/tmp/missarf_cli_test";

int run(const std::string& args) {
    const std::string cmd = kBin + " " + args + " 2>" + kDir + "/stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Results CSV with the trailing wall_ms column removed; wall time is the one
// column that legitimately differs between reruns.
std::string strip_wall_ms(const std::string& csv) {
    std::stringstream in(csv), out;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.rfind(',');
        out << line.substr(0, pos) << "\n";
    }
    return out.str();
}

struct Setup {
    Setup() {
        std::system(("rm -rf " + kDir + " && mkdir -p " + kDir).c_str());
    }
};
const Setup setup;

}  // namespace

TEST_CASE("version and help") {
    CHECK(run("--version >" + kDir + "/v.txt") == 0);
    CHECK(slurp(kDir + "/v.txt").find("model format 1") != std::string::npos);
    CHECK(run("impute --help >" + kDir + "/h.txt") == 0);
    const std::string help = slurp(kDir + "/h.txt");
    CHECK(help.find("--trees") != std::string::npos);
    CHECK(help.find("100") != std::string::npos);   // default trees
    CHECK(help.find("10") != std::string::npos);    // default min node size
    CHECK(help.find("20") != std::string::npos);    // default m
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("impute --input /nonexistent.csv") == 2);  // missing required --out
    CHECK(run("bogus-subcommand") == 2);
    CHECK(run("impute --input a.csv --out b --single --m 3") == 2);  // conflicting modes
}

TEST_CASE("data errors exit with code 3") {
    CHECK(run("impute --input /nonexistent.csv --out " + kDir + "/x") == 3);
    std::ofstream(kDir + "/header_only.csv") << "a,b\n";
    CHECK(run("impute --input " + kDir + "/header_only.csv --out " + kDir + "/x") == 3);
}

TEST_CASE("simulate is deterministic and writes features plus outcome") {
    const std::string out1 = kDir + "/sim1.csv";
    const std::string out2 = kDir + "/sim2.csv";
    CHECK(run("simulate --n 50 --p 3 --marginal uniform --seed 7 --out " + out1) == 0);
    CHECK(run("simulate --n 50 --p 3 --marginal uniform --seed 7 --out " + out2) == 0);
    const std::string a = slurp(out1);
    CHECK(a == slurp(out2));
    CHECK(a.substr(0, a.find('\n')) == "x1,x2,x3,y");

    const std::string out3 = kDir + "/sim3.csv";
    CHECK(run("simulate --n 50 --p 3 --marginal uniform --seed 8 --out " + out3) == 0);
    CHECK(a != slurp(out3));
}

TEST_CASE("ampute introduces NA cells deterministically") {
    const std::string sim = kDir + "/amp_in.csv";
    REQUIRE(run("simulate --n 100 --p 2 --seed 3 --out " + sim) == 0);
    const std::string out1 = kDir + "/amp1.csv";
    const std::string out2 = kDir + "/amp2.csv";
    CHECK(run("ampute --input " + sim + " --out " + out1 +
              " --mechanism MNAR --proportion 0.3 --targets x1 --seed 5") == 0);
    CHECK(run("ampute --input " + sim + " --out " + out2 +
              " --mechanism MNAR --proportion 0.3 --targets x1 --seed 5") == 0);
    CHECK(slurp(out1) == slurp(out2));
    CHECK(slurp(out1).find("NA") != std::string::npos);
}

TEST_CASE("impute on complete data reproduces the input file") {
    const std::string sim = kDir + "/complete.csv";
    REQUIRE(run("simulate --n 40 --p 2 --seed 11 --out " + sim) == 0);
    CHECK(run("impute --input " + sim + " --out " + kDir + "/id --trees 10 --seed 1") == 0);
    CHECK(slurp(kDir + "/id_1.csv") == slurp(sim));
}

TEST_CASE("multiple imputation writes m files plus provenance, deterministically") {
    const std::string sim = kDir + "/mi_in.csv";
    const std::string amp = kDir + "/mi_amp.csv";
    REQUIRE(run("simulate --n 80 --p 2 --seed 13 --out " + sim) == 0);
    REQUIRE(run("ampute --input " + sim + " --out " + amp + " --proportion 0.2 --seed 14") ==
            0);

    CHECK(run("impute --input " + amp + " --out " + kDir + "/mi --m 3 --trees 10 --seed 21") ==
          0);
    const std::string f1 = slurp(kDir + "/mi_1.csv");
    const std::string f2 = slurp(kDir + "/mi_2.csv");
    const std::string f3 = slurp(kDir + "/mi_3.csv");
    CHECK_FALSE(f1.empty());
    CHECK_FALSE(f2.empty());
    CHECK_FALSE(f3.empty());
    CHECK(f1.find("NA") == std::string::npos);
    const std::string prov = slurp(kDir + "/mi_provenance.txt");
    CHECK(prov.find("seed=21") != std::string::npos);
    CHECK(prov.find("model_fingerprint=") != std::string::npos);

    // Same seed, different thread counts: byte-identical outputs.
    CHECK(run("--threads 1 impute --input " + amp + " --out " + kDir +
              "/mi_t1 --m 3 --trees 10 --seed 21") == 0);
    CHECK(run("--threads 4 impute --input " + amp + " --out " + kDir +
              "/mi_t4 --m 3 --trees 10 --seed 21") == 0);
    CHECK(slurp(kDir + "/mi_t1_1.csv") == f1);
    CHECK(slurp(kDir + "/mi_t4_1.csv") == f1);
    CHECK(slurp(kDir + "/mi_t4_3.csv") == f3);
}

TEST_CASE("fit writes a model and logprob scores rows with it") {
    const std::string sim = kDir + "/fit_in.csv";
    REQUIRE(run("simulate --n 60 --p 2 --seed 17 --out " + sim) == 0);
    const std::string model = kDir + "/model.json";
    CHECK(run("fit --input " + sim + " --model " + model + " --trees 8 --seed 19") == 0);

    CHECK(run("logprob --model " + model + " --input " + sim + " >" + kDir + "/lp.txt") == 0);
    std::ifstream lp(kDir + "/lp.txt");
    std::string line;
    std::size_t count = 0;
    while (std::getline(lp, line)) {
        const double v = std::strtod(line.c_str(), nullptr);
        CHECK(std::isfinite(v));
        CHECK(line.find('e') != std::string::npos);  // scientific notation
        ++count;
    }
    CHECK(count == 60);

    // Missing cells are a data error.
    const std::string amp = kDir + "/fit_amp.csv";
    REQUIRE(run("ampute --input " + sim + " --out " + amp + " --proportion 0.2 --seed 23") ==
            0);
    CHECK(run("logprob --model " + model + " --input " + amp) == 3);
}

TEST_CASE("benchmark config errors exit with 2 and carry line numbers") {
    std::ofstream(kDir + "/bad.ini") << "setting = single\nnot a kv line\n";
    CHECK(run("benchmark --config " + kDir + "/bad.ini --out " + kDir + "/r.csv") == 2);
    const std::string err = slurp(kDir + "/stderr.txt");
    CHECK(err.find(":2:") != std::string::npos);
}

TEST_CASE("benchmark runs a small grid deterministically") {
    std::ofstream(kDir + "/grid.ini") << "setting = single\n"
                                      << "n = 60\np = 2\n"
                                      << "marginal = normal\neffect = linear\n"
                                      << "mechanism = MCAR\nproportion = 0.2\n"
                                      << "methods = median, random\n"
                                      << "replicates = 2\ntrees = 5\nseed = 4\n";
    CHECK(run("benchmark --config " + kDir + "/grid.ini --out " + kDir + "/r1.csv") == 0);
    CHECK(run("benchmark --config " + kDir + "/grid.ini --out " + kDir + "/r2.csv") == 0);
    const std::string r1 = slurp(kDir + "/r1.csv");
    CHECK(strip_wall_ms(r1) == strip_wall_ms(slurp(kDir + "/r2.csv")));
    CHECK(r1.find("nrmse") != std::string::npos);
    CHECK(r1.find("brier") != std::string::npos);
}
