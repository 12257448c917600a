#include "doctest.h"
#include "rml/config.hpp"
#include "rml/report.hpp"
#include "rml/runner.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rml;
namespace fs = std::filesystem;

namespace {
config::ConfigFile parse(const std::string& text) {
    std::istringstream in(text);
    return config::ConfigFile::parse(in, "test.cfg");
}

std::string error_of(const std::string& text) {
    try {
        (void)runner::plan(parse(text));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const char* small_two_sample = R"(experiment = two-sample
seed = 7
[twosample]
d = 3
n = 30
null_simulations = 100
replications = 10
separations = 0,0.5
)";
}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse("a = 1\n# comment\n[s]\nb = 2.5  # trailing\nlist = 1, 2,3\n");
    CHECK(c.integer("a", 0) == 1);
    CHECK(c.number("s.b", 0) == 2.5);
    CHECK(c.integers("s.list", {}) == std::vector<std::int64_t>{1, 2, 3});
    CHECK(c.number("s.missing", 4.0) == 4.0);
    CHECK(c.where("s.b") == "test.cfg:4: ");
    CHECK_THROWS_AS(c.text("nope"), ConfigError);
    CHECK_THROWS_AS(parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[open\n"), ConfigError);
    CHECK_THROWS_AS(parse("novalue\n"), ConfigError);
    CHECK_THROWS_AS(parse("x = 1.5\n").integer("x", 0), ConfigError);
}

TEST_CASE("plan errors name the field and line") {
    CHECK(error_of("experiment = nope\nseed = 1\n").find("two-sample") != std::string::npos);
    CHECK(error_of("experiment = two-sample\n").find("seed") != std::string::npos);
    const auto unknown = error_of("experiment = two-sample\nseed = 1\n[twosample]\nsize = 3\n");
    CHECK(unknown.find("test.cfg:4") != std::string::npos);
    CHECK(unknown.find("twosample.size") != std::string::npos);
    const auto kernel = error_of("experiment = spatial\nseed = 1\n[spatial]\nkernels = 3\n");
    CHECK(kernel.find("test.cfg:4") != std::string::npos);
    CHECK(kernel.find('3') != std::string::npos);
    CHECK(kernel.find("16") != std::string::npos);
}

TEST_CASE("csv and checksum helpers") {
    report::Table t;
    t.header = {"name", "value"};
    t.add({std::string("a,b"), 0.1});
    t.add({std::string("c"), std::int64_t{3}});
    CHECK(report::to_csv(t) == "name,value\n\"a,b\",0.1\nc,3\n");
    CHECK(report::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(report::hex64(255) == "00000000000000ff");
}

TEST_CASE("same seed gives byte-identical artifacts") {
    const fs::path root = fs::temp_directory_path() / "rml_determinism";
    fs::remove_all(root);
    std::string first, second, other;
    for (int run = 0; run < 3; ++run) {
        runner::Overrides ov;
        ov.out = root / std::to_string(run);
        if (run == 2) ov.seed = 8;
        const auto summary = runner::execute(runner::plan(parse(small_two_sample), ov));
        CHECK(fs::exists(summary.out / "manifest.json"));
        (run == 0 ? first : run == 1 ? second : other) = slurp(summary.out / "metrics.csv");
    }
    CHECK(!first.empty());
    CHECK(first == second);
    CHECK(first != other);
    fs::remove_all(root);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = fs::temp_directory_path() / "rml_cli";
    fs::create_directories(dir);
    {
        std::ofstream(dir / "bad.cfg") << "experiment = spatial\nseed = 1\n[spatial]\nkernels = 3\n";
        std::ofstream(dir / "good.cfg") << small_two_sample;
    }
    const std::string exe = RML_LAB_PATH;
    auto status = [&](const std::string& args) {
        const int s = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status("validate " + (dir / "bad.cfg").string()) == 2);
    CHECK(status("validate " + (dir / "missing.cfg").string()) == 2);
    CHECK(status("validate " + (dir / "good.cfg").string()) == 0);
    CHECK(status("--out " + (dir / "run").string() + " run " + (dir / "good.cfg").string()) == 0);
    CHECK(fs::exists(dir / "run" / "power.svg"));
    fs::remove_all(dir);
}
