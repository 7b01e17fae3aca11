#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lbdmids/data.hpp"
#include "lbdmids/errors.hpp"
#include "lbdmids/metrics.hpp"
#include "lbdmids/serial.hpp"
#include "lbdmids/synth.hpp"
#include "lbdmids/train.hpp"

namespace {

using namespace lbdmids;

std::vector<std::pair<std::string, std::size_t>> parse_counts(
    const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, std::size_t>> counts;
    for (const std::string& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("counts entry '" + item + "' is not of the form Class=N");
        }
        const std::string name = item.substr(0, eq);
        const std::string num = item.substr(eq + 1);
        char* end = nullptr;
        const unsigned long long n = std::strtoull(num.c_str(), &end, 10);
        if (num.empty() || end != num.c_str() + num.size()) {
            throw ConfigError("counts entry '" + item + "' has a non-numeric count");
        }
        counts.emplace_back(name, static_cast<std::size_t>(n));
    }
    if (counts.empty()) throw ConfigError("at least one Class=N count is required");
    return counts;
}

ReportFormat parse_format(const std::string& name) {
    if (name == "table") return ReportFormat::table;
    if (name == "csv") return ReportFormat::csv;
    if (name == "structured") return ReportFormat::structured_text;
    throw ConfigError("unknown report format '" + name + "'");
}

void print_warnings(const std::vector<std::string>& warnings, const char* stage) {
    if (warnings.empty()) return;
    std::cerr << stage << ": " << warnings.size() << " row diagnostics\n";
    const std::size_t shown = std::min<std::size_t>(warnings.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) std::cerr << "  " << warnings[i] << "\n";
    if (warnings.size() > shown) {
        std::cerr << "  ... " << (warnings.size() - shown) << " more\n";
    }
}

void check_model_data_compat(const TrainedModel& model, const PreprocessedDataset& ds) {
    if (model.schema_name != ds.schema_name) {
        throw DataError("schema mismatch: model was trained on " + model.schema_name +
                        ", dataset uses " + ds.schema_name);
    }
    if (model.class_names != ds.class_names) {
        throw DataError("class name mismatch between model and dataset");
    }
    if (!(model.stats == ds.stats)) {
        throw DataError("normalization statistics differ between model and dataset; "
                        "evaluate against files from the preprocess run that fed training");
    }
}

struct GenerateArgs {
    std::string schema;
    std::vector<std::string> counts;
    std::string profiles;
    std::uint64_t seed = 42;
    std::size_t block_rows = 256;
    std::string out;
};

int cmd_generate(const GenerateArgs& a) {
    const DatasetSchema& schema = schema_by_name(a.schema);
    const ProfileSet profiles =
        a.profiles.empty() ? default_profiles(schema) : load_profiles(a.profiles, schema);
    const auto counts = parse_counts(a.counts);
    generate_csv(schema, profiles, counts, a.seed, a.out, a.block_rows);
    std::size_t total = 0;
    for (const auto& [name, n] : counts) total += n;
    std::cout << "wrote " << total << " rows to " << a.out << "\n";
    return 0;
}

struct PreprocessArgs {
    std::string input;
    std::string schema;
    std::size_t timesteps = 10;
    double train_fraction = 0.75;
    std::uint64_t seed = 42;
    std::string out_train;
    std::string out_val;
};

int cmd_preprocess(const PreprocessArgs& a) {
    if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0)) {
        throw ConfigError("--train-fraction must lie strictly between 0 and 1, got " +
                          std::to_string(a.train_fraction));
    }
    const DatasetSchema& schema = schema_by_name(a.schema);

    IngestResult ingest = ingest_csv(a.input, schema);
    print_warnings(ingest.warnings, "ingest");
    if (ingest.records.empty()) throw DataError(a.input + ": no usable data rows");

    NumerizeResult num = numerize(ingest.records, schema);
    print_warnings(num.warnings, "numerize");

    SplitIndices split = stratified_split(num.labels, schema.class_names.size(),
                                          a.train_fraction, a.seed);
    for (const std::string& w : split.warnings) std::cerr << "split: " << w << "\n";
    if (split.validation.empty()) {
        throw DataError("validation split is empty; supply more rows or a smaller fraction");
    }

    const Matrix train_x = take_rows(num.matrix.values, split.train);
    const Matrix val_x = take_rows(num.matrix.values, split.validation);
    const auto train_y = take_labels(num.labels, split.train);
    const auto val_y = take_labels(num.labels, split.validation);

    const ColumnStats stats = zscore_fit(train_x);

    PreprocessedDataset train_ds;
    train_ds.schema_name = schema.name;
    train_ds.class_names = schema.class_names;
    train_ds.stats = stats;
    train_ds.windows =
        window(zscore_transform(train_x, stats), train_y, a.timesteps, schema.class_names);
    save_dataset(train_ds, a.out_train);

    PreprocessedDataset val_ds = train_ds;
    val_ds.windows =
        window(zscore_transform(val_x, stats), val_y, a.timesteps, schema.class_names);
    save_dataset(val_ds, a.out_val);

    std::cout << "rows ingested:        " << ingest.records.size() << "\n"
              << "dropped null:         " << num.dropped_null << "\n"
              << "dropped duplicates:   " << num.dropped_duplicate << "\n"
              << "dropped unknown label:" << num.dropped_unknown_label << "\n"
              << "rows kept:            " << num.labels.size() << "\n";
    std::vector<std::size_t> class_counts(schema.class_names.size(), 0);
    for (std::size_t l : num.labels) ++class_counts[l];
    for (std::size_t c = 0; c < class_counts.size(); ++c) {
        std::cout << "  " << schema.class_names[c] << ": " << class_counts[c] << "\n";
    }
    std::cout << "train rows:           " << split.train.size() << "\n"
              << "validation rows:      " << split.validation.size() << "\n"
              << "train windows:        " << train_ds.windows.tensor.samples << " -> "
              << a.out_train << "\n"
              << "validation windows:   " << val_ds.windows.tensor.samples << " -> " << a.out_val
              << "\n";
    return 0;
}

struct TrainArgs {
    std::string train_path;
    std::string val_path;
    std::string preset;
    std::string variant;
    std::vector<std::size_t> layers;
    std::optional<std::size_t> epochs;
    std::optional<double> learning_rate;
    std::optional<std::size_t> batch_size;
    std::optional<std::uint64_t> seed;
    std::optional<double> clip_norm;
    std::optional<std::size_t> patience;
    bool no_early_stop = false;
    std::string out;
    std::string history_path;
};

ModelConfig resolve_train_config(const TrainArgs& a) {
    ModelConfig cfg;
    if (!a.preset.empty()) {
        if (a.preset == "unsw-stacked") {
            cfg = preset_config("unsw_nb15", Variant::stacked);
        } else if (a.preset == "unsw-bilstm") {
            cfg = preset_config("unsw_nb15", Variant::bidirectional);
        } else if (a.preset == "botiot-stacked") {
            cfg = preset_config("bot_iot", Variant::stacked);
        } else if (a.preset == "botiot-bilstm") {
            cfg = preset_config("bot_iot", Variant::bidirectional);
        } else {
            throw ConfigError("unknown preset '" + a.preset +
                              "'; expected unsw-stacked, unsw-bilstm, botiot-stacked or "
                              "botiot-bilstm");
        }
    }
    if (!a.variant.empty()) {
        if (a.variant == "stacked") cfg.variant = Variant::stacked;
        else if (a.variant == "bidirectional") cfg.variant = Variant::bidirectional;
        else throw ConfigError("unknown variant '" + a.variant + "'");
    }
    if (!a.layers.empty()) cfg.layer_cells = a.layers;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.learning_rate) cfg.learning_rate = *a.learning_rate;
    if (a.batch_size) cfg.batch_size = *a.batch_size;
    if (a.seed) cfg.seed = *a.seed;
    if (a.clip_norm) cfg.clip_global_norm = *a.clip_norm;
    if (a.patience) cfg.early_stop_patience = *a.patience;
    if (a.no_early_stop) cfg.early_stop_patience.reset();
    if (cfg.layer_cells.empty()) {
        throw ConfigError("no layer sizes; use --preset or --layers");
    }
    return cfg;
}

void print_effective_config(const ModelConfig& cfg, std::size_t effective_timesteps) {
    std::cerr << "config: variant="
              << (cfg.variant == Variant::stacked ? "stacked" : "bidirectional") << " layers=";
    for (std::size_t i = 0; i < cfg.layer_cells.size(); ++i) {
        if (i > 0) std::cerr << ",";
        std::cerr << cfg.layer_cells[i];
    }
    std::cerr << " epochs=" << cfg.epochs << " lr=" << cfg.learning_rate
              << " batch=" << cfg.batch_size << " timesteps=" << effective_timesteps
              << " seed=" << cfg.seed << " clip="
              << (cfg.clip_global_norm ? std::to_string(*cfg.clip_global_norm) : "off")
              << " patience="
              << (cfg.early_stop_patience ? std::to_string(*cfg.early_stop_patience) : "off")
              << " threads=" << worker_threads() << "\n";
}

int cmd_train(const TrainArgs& a) {
    ModelConfig cfg = resolve_train_config(a);
    require_valid(cfg);
    const PreprocessedDataset train_ds = load_dataset(a.train_path);
    const PreprocessedDataset val_ds = load_dataset(a.val_path);
    print_effective_config(cfg, train_ds.windows.timesteps);

    const TrainedModel model = train(train_ds, val_ds, cfg);
    save_model(model, a.out);
    if (!a.history_path.empty()) atomic_write_text(a.history_path, history_csv(model.history));

    const EpochStats& last = model.history.back();
    double best_val = last.val_loss;
    std::size_t best_epoch = model.history.size();
    for (std::size_t i = 0; i < model.history.size(); ++i) {
        if (model.history[i].val_loss < best_val) {
            best_val = model.history[i].val_loss;
            best_epoch = i + 1;
        }
    }
    std::cout << "epochs run: " << model.history.size() << "\n"
              << "final: train_loss=" << last.train_loss << " train_acc=" << last.train_accuracy
              << " val_loss=" << last.val_loss << " val_acc=" << last.val_accuracy << "\n"
              << "best epoch " << best_epoch << " (val_loss=" << best_val
              << "); saved its weights to " << a.out << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string model_path;
    std::string data_path;
    std::string format = "table";
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const TrainedModel model = load_model(a.model_path);
    const PreprocessedDataset ds = load_dataset(a.data_path);
    check_model_data_compat(model, ds);

    const auto t0 = std::chrono::steady_clock::now();
    const Predictions preds = predict(model, ds.windows.tensor);
    const auto t1 = std::chrono::steady_clock::now();

    const ConfusionMatrix cm = confusion(ds.windows.labels, preds.labels,
                                         ds.class_names.size(), ds.class_names);
    const std::string text = render_report(report(cm), parse_format(a.format));
    if (a.out.empty()) {
        std::cout << text;
    } else {
        atomic_write_text(a.out, text);
    }

    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    std::cerr << "evaluated " << ds.windows.tensor.samples << " windows in " << ms << " ms ("
              << ms / static_cast<double>(ds.windows.tensor.samples) << " ms/sample)\n";
    return 0;
}

struct PredictArgs {
    std::string model_path;
    std::string data_path;
    std::string out;
    bool probabilities = false;
};

int cmd_predict(const PredictArgs& a) {
    const TrainedModel model = load_model(a.model_path);
    const PreprocessedDataset ds = load_dataset(a.data_path);
    check_model_data_compat(model, ds);

    const Predictions preds = predict(model, ds.windows.tensor);

    std::string out = "window,true,pred,class";
    if (a.probabilities) {
        for (const std::string& name : model.class_names) out += ",p_" + name;
    }
    out += "\n";
    char buf[40];
    for (std::size_t i = 0; i < preds.labels.size(); ++i) {
        out += std::to_string(i) + "," + std::to_string(ds.windows.labels[i]) + "," +
               std::to_string(preds.labels[i]) + "," + model.class_names[preds.labels[i]];
        if (a.probabilities) {
            for (std::size_t c = 0; c < model.class_names.size(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", preds.probabilities(i, c));
                out += ",";
                out += buf;
            }
        }
        out += "\n";
    }
    if (a.out.empty()) {
        std::cout << out;
    } else {
        atomic_write_text(a.out, out);
    }
    return 0;
}

struct ReportArgs {
    std::string predictions;
    std::string format = "table";
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    std::ifstream in(a.predictions, std::ios::binary);
    if (!in) throw IoError("cannot open " + a.predictions + " for reading");
    CsvReader reader(in);
    std::vector<std::string> fields;
    if (!reader.next_row(fields)) throw DataError(a.predictions + ": empty predictions file");

    std::size_t true_col = fields.size(), pred_col = fields.size();
    std::vector<std::string> class_names;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "true") true_col = i;
        if (fields[i] == "pred") pred_col = i;
        if (fields[i].rfind("p_", 0) == 0) class_names.push_back(fields[i].substr(2));
    }
    if (true_col == fields.size() || pred_col == fields.size()) {
        throw DataError(a.predictions + ": header must carry 'true' and 'pred' columns");
    }

    std::vector<std::size_t> truth, preds;
    while (reader.next_row(fields)) {
        if (fields.size() <= std::max(true_col, pred_col)) {
            throw DataError(a.predictions + ": short row " +
                            std::to_string(reader.row_number()));
        }
        truth.push_back(std::stoul(fields[true_col]));
        preds.push_back(std::stoul(fields[pred_col]));
    }
    if (truth.empty()) throw DataError(a.predictions + ": no prediction rows");

    std::size_t k = 0;
    for (std::size_t v : truth) k = std::max(k, v + 1);
    for (std::size_t v : preds) k = std::max(k, v + 1);
    if (!class_names.empty() && class_names.size() >= k) {
        k = class_names.size();
    } else {
        class_names.clear();
    }

    const std::string text =
        render_report(report(confusion(truth, preds, k, class_names)), parse_format(a.format));
    if (a.out.empty()) {
        std::cout << text;
    } else {
        atomic_write_text(a.out, text);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow-based network intrusion detection toolkit"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* sub_gen = app.add_subcommand("generate", "write a synthetic labeled flow CSV");
    sub_gen->add_option("--schema", gen.schema, "dataset schema (unsw_nb15 or bot_iot)")
        ->required();
    sub_gen->add_option("--counts", gen.counts, "per-class row counts, Class=N")
        ->required()
        ->delimiter(',');
    sub_gen->add_option("--profiles", gen.profiles, "JSON profile config (default: built-ins)");
    sub_gen->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    sub_gen->add_option("--block-rows", gen.block_rows, "rows per class before interleaving moves on")
        ->capture_default_str();
    sub_gen->add_option("--out", gen.out, "output CSV path")->required();

    PreprocessArgs pre;
    CLI::App* sub_pre =
        app.add_subcommand("preprocess", "ingest, normalize, split and window a flow CSV");
    sub_pre->add_option("--input", pre.input, "input CSV")->required();
    sub_pre->add_option("--schema", pre.schema, "dataset schema")->required();
    sub_pre->add_option("--timesteps", pre.timesteps, "window length")->capture_default_str();
    sub_pre->add_option("--train-fraction", pre.train_fraction, "fraction of rows for training")
        ->capture_default_str();
    sub_pre->add_option("--seed", pre.seed, "split shuffle seed")->capture_default_str();
    sub_pre->add_option("--out-train", pre.out_train, "training dataset file")->required();
    sub_pre->add_option("--out-val", pre.out_val, "validation dataset file")->required();

    TrainArgs tra;
    CLI::App* sub_tra = app.add_subcommand("train", "train an LSTM classifier");
    sub_tra->add_option("--train", tra.train_path, "training dataset file")->required();
    sub_tra->add_option("--val", tra.val_path, "validation dataset file")->required();
    sub_tra->add_option("--preset", tra.preset,
                        "unsw-stacked, unsw-bilstm, botiot-stacked or botiot-bilstm");
    sub_tra->add_option("--variant", tra.variant, "stacked or bidirectional");
    sub_tra->add_option("--layers", tra.layers, "cells per layer")->delimiter(',');
    sub_tra->add_option("--epochs", tra.epochs, "epoch limit");
    sub_tra->add_option("--learning-rate", tra.learning_rate, "Adam learning rate");
    sub_tra->add_option("--batch-size", tra.batch_size, "minibatch size (default 256)");
    sub_tra->add_option("--seed", tra.seed, "init and shuffle seed (default 42)");
    sub_tra->add_option("--clip-norm", tra.clip_norm, "global gradient-norm clip");
    sub_tra->add_option("--patience", tra.patience,
                        "early-stop patience on validation loss (default 5)");
    sub_tra->add_flag("--no-early-stop", tra.no_early_stop, "always run every epoch");
    sub_tra->add_option("--out", tra.out, "model file")->required();
    sub_tra->add_option("--history", tra.history_path, "epoch history CSV");

    EvaluateArgs eva;
    CLI::App* sub_eva =
        app.add_subcommand("evaluate", "classification report of a model on a dataset");
    sub_eva->add_option("--model", eva.model_path, "model file")->required();
    sub_eva->add_option("--data", eva.data_path, "dataset file")->required();
    sub_eva->add_option("--format", eva.format, "table, csv or structured")
        ->capture_default_str();
    sub_eva->add_option("--out", eva.out, "write the report here instead of stdout");

    PredictArgs prd;
    CLI::App* sub_prd = app.add_subcommand("predict", "per-window predictions of a model");
    sub_prd->add_option("--model", prd.model_path, "model file")->required();
    sub_prd->add_option("--data", prd.data_path, "dataset file")->required();
    sub_prd->add_option("--out", prd.out, "write predictions CSV here instead of stdout");
    sub_prd->add_flag("--probabilities", prd.probabilities, "include per-class probabilities");

    ReportArgs rep;
    CLI::App* sub_rep =
        app.add_subcommand("report", "render a classification report from a predictions CSV");
    sub_rep->add_option("--predictions", rep.predictions, "CSV from the predict subcommand")
        ->required();
    sub_rep->add_option("--format", rep.format, "table, csv or structured")
        ->capture_default_str();
    sub_rep->add_option("--out", rep.out, "write the report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(sub_gen)) return cmd_generate(gen);
        if (app.got_subcommand(sub_pre)) return cmd_preprocess(pre);
        if (app.got_subcommand(sub_tra)) return cmd_train(tra);
        if (app.got_subcommand(sub_eva)) return cmd_evaluate(eva);
        if (app.got_subcommand(sub_prd)) return cmd_predict(prd);
        if (app.got_subcommand(sub_rep)) return cmd_report(rep);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
