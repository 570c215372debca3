#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpd/experiments.hpp"
#include "cpd/simulate.hpp"

using namespace cpd;

namespace {

const char* kCache = "test_exp_cache.jsonl";

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.scenarios = {
        {"S1", ModelSpec::ingarch(1, 1), {1.0, 0.2, 0.15}, {1.0, 0.2, 0.15}, false},
        {"S3", ModelSpec::ingarch(1, 1), {2.5, 0.0, 0.35}, {4.5, 0.05, 0.6}, true},
    };
    cfg.ms = {40};
    cfg.replications = 6;
    cfg.burnin = 200;
    cfg.master_seed = 11;
    cfg.cache_path = kCache;
    return cfg;
}

}  // namespace

TEST_CASE("csv loader accepts plain counts") {
    write_file("counts_plain.csv", "3\n1\n2\n");
    const CountSeries y = load_counts_csv("counts_plain.csv");
    CHECK(y.counts == std::vector<long>{3, 1, 2});
    std::filesystem::remove("counts_plain.csv");
}

TEST_CASE("csv loader handles header, date column, blanks, and CRLF") {
    write_file("counts_dated.csv",
               "date,count\r\n2020-01-01,4\r\n2020-01-02, 0\n\n2020-01-03,12\n");
    const CountSeries y = load_counts_csv("counts_dated.csv");
    CHECK(y.counts == std::vector<long>{4, 0, 12});
    std::filesystem::remove("counts_dated.csv");
}

TEST_CASE("csv loader reports the offending line") {
    write_file("counts_bad.csv", "2\n1\n2.5\n3\n");
    CHECK_THROWS_WITH_AS(load_counts_csv("counts_bad.csv"),
                         "invalid count value '2.5' (line 3)", ParseError);
    try {
        load_counts_csv("counts_bad.csv");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    write_file("counts_neg.csv", "2\n-1\n");
    CHECK_THROWS_AS(load_counts_csv("counts_neg.csv"), ParseError);
    write_file("counts_empty.csv", "");
    CHECK_THROWS_AS(load_counts_csv("counts_empty.csv"), std::invalid_argument);
    CHECK_THROWS_AS(load_counts_csv("no_such_file.csv"), ParseError);
    std::filesystem::remove("counts_bad.csv");
    std::filesystem::remove("counts_neg.csv");
    std::filesystem::remove("counts_empty.csv");
}

TEST_CASE("default scenario definitions") {
    const auto scen = Scenario::paper_defaults();
    REQUIRE(scen.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(scen[i].id == "S" + std::to_string(i / 2 + 1));
        CHECK(scen[i].has_change == (i % 2 == 1));
        CHECK(scen[i].spec.dim() == 3);
        if (!scen[i].has_change) CHECK(scen[i].theta0 == scen[i].theta1);
    }
    CHECK(scen[1].theta1 == ThetaVector{1.0, 0.2, 0.5});
    CHECK(scen[3].theta0 == ThetaVector{0.75, 0.5, 0.3});
    CHECK(scen[3].theta1 == ThetaVector{0.25, 0.5, 0.3});
    CHECK(scen[5].theta1 == ThetaVector{4.5, 0.05, 0.6});
}

TEST_CASE("table formatting golden strings") {
    ResultTable t1;
    t1.rows.push_back({"S1", "level", 200, 0, 2.471, 100, 8, 0.08, std::nullopt});
    CHECK(format_table1(t1) ==
          "scenario\tkind\tm\tc_alpha\treplications\trejections\trate\n"
          "S1\tlevel\t200\t2.471000\t100\t8\t0.0800\n");

    ResultTable t2;
    DelayStats s;
    s.n = 96;
    s.mean = 34.92;
    s.sd = 8.5;
    s.min = 12;
    s.q1 = 29;
    s.median = 35.5;
    s.q3 = 41;
    s.max = 50;
    t2.rows.push_back({"S1", "power", 200, 250, 2.471, 100, 96, 0.96, s});
    t2.rows.push_back({"S2", "power", 200, 250, 2.471, 100, 0, 0.0, std::nullopt});
    CHECK(format_table2(t2) ==
          "scenario\tm\tk_star\tdetections\tmean\tsd\tmin\tq1\tmedian\tq3\tmax\n"
          "S1\t200\t250\t96\t34.92\t8.50\t12\t29.00\t35.50\t41.00\t50\n"
          "S2\t200\t250\t0\tNA\tNA\tNA\tNA\tNA\tNA\tNA\n");
}

TEST_CASE("level/power run is deterministic and matches the serial reference") {
    const ExperimentConfig cfg = tiny_config();
    const ResultTable a = run_level_power(cfg);
    const ResultTable b = run_level_power_serial(cfg);
    CHECK(format_table1(a) == format_table1(b));
    CHECK(a.failed_replications == b.failed_replications);
    const ResultTable c = run_level_power(cfg);
    CHECK(format_table1(a) == format_table1(c));

    REQUIRE(a.rows.size() == 2);
    CHECK(a.rows[0].kind == "level");
    CHECK(a.rows[1].kind == "power");
    CHECK(a.rows[0].replications + 0 <= cfg.replications);
    CHECK(a.rows[0].c_alpha > 0.0);
    CHECK(a.rows[1].rate >= 0.0);
    CHECK(a.rows[1].rate <= 1.0);
    // The strong S3 shift at this size should reject at least once.
    CHECK(a.rows[1].rejections >= 1);
}

TEST_CASE("delay statistics are ordered and tied to detections") {
    ExperimentConfig cfg = tiny_config();
    cfg.replications = 8;
    const ResultTable t = run_delay_stats(cfg);
    REQUIRE(t.rows.size() == 1);  // null scenario filtered out
    const TableRow& row = t.rows[0];
    CHECK(row.scenario == "S3");
    CHECK(row.k_star == 50);  // 1.25 * 40
    if (row.delays) {
        const DelayStats& s = *row.delays;
        CHECK(s.n == static_cast<std::size_t>(row.rejections));
        CHECK(s.min <= s.q1);
        CHECK(s.q1 <= s.median);
        CHECK(s.median <= s.q3);
        CHECK(s.q3 <= s.max);
        CHECK(s.mean >= s.min);
        CHECK(s.mean <= s.max);
        CHECK(s.min >= 1.0);
    }
    ExperimentConfig null_only = cfg;
    null_only.scenarios = {cfg.scenarios[0]};
    CHECK_THROWS_AS(run_delay_stats(null_only), std::invalid_argument);
    ExperimentConfig zero = cfg;
    zero.replications = 0;
    CHECK_THROWS_AS(run_level_power(zero), std::invalid_argument);
}

TEST_CASE("detector series file round trip") {
    const std::size_t m = 40;
    ChangeSpec change;
    change.theta0 = {2.5, 0.0, 0.35};
    change.theta1 = {6.0, 0.05, 0.6};
    change.k_star = 50;
    change.total_len = 61;
    const ModelSpec spec = ModelSpec::ingarch(1, 1);
    const CountSeries y = simulate_with_change(change, spec, 200, 3);
    // Threshold pinned with the seed so the stop lands after the change
    // (statistic stays below 1 pre-change, first crosses 2 at k = 56).
    MonitorConfig mc;
    mc.m = m;
    mc.c_alpha = 2.0;
    emit_detector_series(spec, y, mc, "detector_series.tsv");

    std::ifstream in("detector_series.tsv");
    REQUIRE(static_cast<bool>(in));
    std::string header;
    std::getline(in, header);
    CHECK(header == "k\traw_max\tnormalized_max\tthreshold\tmarker");
    std::size_t rows = 0, change_marks = 0, stop_marks = 0;
    std::string line;
    std::size_t expect_k = m + 1;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::size_t k;
        double raw, norm, thr;
        std::string marker;
        fields >> k >> raw >> norm >> thr;
        std::getline(fields, marker);
        CHECK(k == expect_k++);
        CHECK(thr == 2.0);
        CHECK(raw >= 0.0);
        if (marker.find("change") != std::string::npos) ++change_marks;
        if (marker.find("stop") != std::string::npos) ++stop_marks;
        ++rows;
    }
    CHECK(rows >= 10);
    CHECK(change_marks == 1);
    CHECK(stop_marks == 1);
    std::filesystem::remove("detector_series.tsv");
    std::filesystem::remove(kCache);
}
