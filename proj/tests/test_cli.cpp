#include "doctest.h"

#include <cstdlib>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "lbdmids/data.hpp"
#include "lbdmids/serial.hpp"
#include "lbdmids/train.hpp"
#include "test_util.hpp"

using namespace lbdmids;
using testutil::TempDir;

namespace {

std::string binary() {
    const char* bin = std::getenv("LBDMIDS_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "LBDMIDS_BIN must point at the cli binary");
    return bin;
}

// Runs the cli with stdout/stderr captured to files; returns the exit code.
int run_cli(const std::string& args, const std::string& stdout_path = "/dev/null",
            const std::string& stderr_path = "/dev/null") {
    std::string cmd =
        binary() + " " + args + " >" + stdout_path + " 2>" + stderr_path;
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

} // namespace

TEST_CASE("generate writes the requested number of rows") {
    TempDir dir;
    std::string out = dir.file("f.csv");
    int code = run_cli("generate --schema bot_iot --counts Normal=1000,DDoS=1000 --seed 7 --out " +
                       out);
    CHECK(code == 0);
    std::string text = testutil::read_text(out);
    CHECK(count_lines(text) == 2001); // header + 2000 data rows
}

TEST_CASE("generate usage errors") {
    TempDir dir;
    SUBCASE("missing --out") {
        CHECK(run_cli("generate --schema bot_iot --counts Normal=10") != 0);
    }
    SUBCASE("unknown schema") {
        CHECK(run_cli("generate --schema kdd99 --counts Normal=10 --out " + dir.file("x.csv")) ==
              1);
    }
    SUBCASE("malformed counts") {
        CHECK(run_cli("generate --schema bot_iot --counts Normal --out " + dir.file("x.csv")) ==
              1);
    }
    SUBCASE("unknown class in counts") {
        CHECK(run_cli("generate --schema bot_iot --counts Martian=10 --out " + dir.file("x.csv")) ==
              1);
    }
}

TEST_CASE("generate is deterministic across invocations") {
    TempDir dir;
    std::string args = "generate --schema bot_iot --counts Normal=200,Theft=100 --seed 9 --out ";
    CHECK(run_cli(args + dir.file("a.csv")) == 0);
    CHECK(run_cli(args + dir.file("b.csv")) == 0);
    CHECK(testutil::read_text(dir.file("a.csv")) == testutil::read_text(dir.file("b.csv")));
}

TEST_CASE("preprocess window counts follow the split arithmetic") {
    TempDir dir;
    std::string csv = dir.file("flows.csv");
    REQUIRE(run_cli("generate --schema bot_iot --counts Normal=400,DDoS=400 --seed 3 --out " +
                    csv) == 0);

    std::string tr = dir.file("tr.bin"), va = dir.file("va.bin");
    int code = run_cli("preprocess --input " + csv +
                           " --schema bot_iot --timesteps 10 --train-fraction 0.75 --seed 3"
                           " --out-train " + tr + " --out-val " + va,
                       dir.file("out.txt"));
    CHECK(code == 0);

    PreprocessedDataset train_set = load_dataset(tr);
    PreprocessedDataset val_set = load_dataset(va);
    CHECK(train_set.windows.tensor.samples == 600 - 9);
    CHECK(val_set.windows.tensor.samples == 200 - 9);
    CHECK(train_set.windows.timesteps == 10);
    CHECK(train_set.schema_name == "bot_iot");
    CHECK(train_set.stats == val_set.stats);

    std::string summary = testutil::read_text(dir.file("out.txt"));
    CHECK(summary.find("train windows") != std::string::npos);

    SUBCASE("train-fraction out of range is a usage error") {
        CHECK(run_cli("preprocess --input " + csv +
                      " --schema bot_iot --train-fraction 1.5 --out-train " + tr +
                      " --out-val " + va) == 1);
    }
    SUBCASE("missing input file is an io error") {
        CHECK(run_cli("preprocess --input " + dir.file("nope.csv") +
                      " --schema bot_iot --out-train " + tr + " --out-val " + va) == 4);
    }
}

TEST_CASE("train evaluate predict report pipeline") {
    TempDir dir;
    std::string csv = dir.file("flows.csv");
    REQUIRE(run_cli("generate --schema bot_iot --counts Normal=400,DDoS=300,Theft=300 --seed 21 "
                    "--out " + csv) == 0);
    std::string tr = dir.file("tr.bin"), va = dir.file("va.bin");
    REQUIRE(run_cli("preprocess --input " + csv + " --schema bot_iot --seed 21 --out-train " +
                    tr + " --out-val " + va) == 0);

    std::string model = dir.file("model.bin"), hist = dir.file("hist.csv");
    std::string train_args = "train --train " + tr + " --val " + va +
                             " --preset botiot-stacked --layers 8 --epochs 2 --out " + model +
                             " --history " + hist;
    REQUIRE(run_cli(train_args) == 0);

    SUBCASE("history respects the overridden epoch budget") {
        std::string text = testutil::read_text(hist);
        CHECK(count_lines(text) <= 3); // header + at most 2 epochs
        CHECK(text.rfind("epoch,", 0) == 0);
    }
    SUBCASE("explicit flags are recorded in the model header") {
        TrainedModel m = load_model(model);
        CHECK(m.config.layer_cells == std::vector<std::size_t>{8});
        CHECK(m.config.epochs == 2);
        CHECK(m.config.learning_rate == 0.002); // preset value kept
    }
    SUBCASE("rerunning the same training is byte-identical") {
        std::string model2 = dir.file("model2.bin"), hist2 = dir.file("hist2.csv");
        REQUIRE(run_cli("train --train " + tr + " --val " + va +
                        " --preset botiot-stacked --layers 8 --epochs 2 --out " + model2 +
                        " --history " + hist2) == 0);
        CHECK(read_file_bytes(model) == read_file_bytes(model2));
        CHECK(testutil::read_text(hist) == testutil::read_text(hist2));
    }
    SUBCASE("evaluate renders a table and a csv") {
        std::string table = dir.file("table.txt");
        CHECK(run_cli("evaluate --model " + model + " --data " + va + " --format table",
                      table) == 0);
        std::string text = testutil::read_text(table);
        CHECK(text.find("Weighted avg") != std::string::npos);
        CHECK(text.find("Normal") != std::string::npos);

        std::string csv_out = dir.file("report.csv");
        CHECK(run_cli("evaluate --model " + model + " --data " + va + " --format csv --out " +
                      csv_out) == 0);
        CHECK(testutil::read_text(csv_out).rfind("class,precision,recall,f1,support\n", 0) == 0);
    }
    SUBCASE("training-set accuracy is at least the holdout accuracy") {
        auto accuracy_of = [&](const std::string& data) {
            std::string out = dir.file("acc_report.csv");
            REQUIRE(run_cli("evaluate --model " + model + " --data " + data +
                            " --format csv --out " + out) == 0);
            std::string text = testutil::read_text(out);
            std::size_t pos = text.find("\naccuracy,,,");
            REQUIRE(pos != std::string::npos);
            return std::strtod(text.c_str() + pos + 12, nullptr);
        };
        CHECK(accuracy_of(tr) >= accuracy_of(va));
    }
    SUBCASE("predictions feed the report command") {
        std::string preds = dir.file("preds.csv");
        CHECK(run_cli("predict --model " + model + " --data " + va + " --probabilities --out " +
                      preds) == 0);
        std::string text = testutil::read_text(preds);
        CHECK(text.rfind("window,true,pred,class", 0) == 0);
        CHECK(count_lines(text) == load_dataset(va).windows.tensor.samples + 1);

        std::string report_out = dir.file("from_preds.txt");
        CHECK(run_cli("report --predictions " + preds + " --format table", report_out) == 0);
        CHECK(testutil::read_text(report_out).find("Weighted avg") != std::string::npos);
    }
    SUBCASE("schema mismatch between model and data is a data error") {
        std::string unsw_csv = dir.file("unsw.csv");
        REQUIRE(run_cli("generate --schema unsw_nb15 --counts Normal=150,DoS=150 --seed 4 --out " +
                        unsw_csv) == 0);
        std::string utr = dir.file("utr.bin"), uva = dir.file("uva.bin");
        REQUIRE(run_cli("preprocess --input " + unsw_csv + " --schema unsw_nb15 --seed 4"
                        " --out-train " + utr + " --out-val " + uva) == 0);
        CHECK(run_cli("evaluate --model " + model + " --data " + uva) == 2);
    }
    SUBCASE("corrupt model file is an io error") {
        std::vector<std::uint8_t> bytes = read_file_bytes(model);
        bytes[bytes.size() / 2] ^= 0x10;
        std::string bad = dir.file("bad.bin");
        atomic_write_file(bad, bytes);
        CHECK(run_cli("evaluate --model " + bad + " --data " + va) == 4);
    }
}

TEST_CASE("train usage errors") {
    TempDir dir;
    SUBCASE("unknown preset") {
        CHECK(run_cli("train --train x.bin --val y.bin --preset resnet --out " +
                      dir.file("m.bin")) == 1);
    }
    SUBCASE("no preset and no layers") {
        CHECK(run_cli("train --train x.bin --val y.bin --variant stacked --out " +
                      dir.file("m.bin")) == 1);
    }
    SUBCASE("missing dataset file") {
        CHECK(run_cli("train --train " + dir.file("nope.bin") + " --val " + dir.file("nope2.bin") +
                      " --preset botiot-stacked --out " + dir.file("m.bin")) == 4);
    }
}
