#include "lbdmids/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"

#include "lbdmids/errors.hpp"
#include "lbdmids/loss.hpp"
#include "lbdmids/metrics.hpp"
#include "lbdmids/rng.hpp"
#include "lbdmids/serial.hpp"

namespace lbdmids {

namespace {

constexpr char kModelMagic[4] = {'L', 'B', 'D', 'M'};
constexpr std::uint32_t kModelVersion = 1;

// Work is cut into fixed-size chunks regardless of thread count and chunk
// results are reduced in slot order, so training is bitwise reproducible
// for any LBDMIDS_THREADS value.
constexpr std::size_t kChunkRows = 32;

void run_slots(std::size_t n_slots, const std::function<void(std::size_t)>& fn) {
    const std::size_t n_threads = std::min(worker_threads(), n_slots);
    if (n_threads <= 1) {
        for (std::size_t s = 0; s < n_slots; ++s) fn(s);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t s = next.fetch_add(1);
                if (s >= n_slots) return;
                try {
                    fn(s);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

Tensor3 gather_windows(const Tensor3& t, const std::vector<std::size_t>& idx,
                       std::size_t begin, std::size_t end) {
    Tensor3 out(end - begin, t.timesteps, t.features);
    const std::size_t stride = t.timesteps * t.features;
    for (std::size_t i = begin; i < end; ++i) {
        const double* src = &t.data[idx[i] * stride];
        std::copy(src, src + stride, &out.data[(i - begin) * stride]);
    }
    return out;
}

std::vector<std::size_t> argmax_rows(const Matrix& logits) {
    std::vector<std::size_t> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double* row = logits.row(r);
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[r] = best;
    }
    return out;
}

struct PassResult {
    double loss_sum = 0.0;
    std::vector<std::size_t> preds;
    ParamGrads grads; // sum over samples, only filled when requested
};

// Forward (and optionally backward) over data rows idx[begin..end), in
// parallel chunks with deterministic reduction.
PassResult run_pass(const LstmParams& params, const Tensor3& data,
                    const std::vector<std::size_t>& labels,
                    const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                    bool want_grads) {
    const std::size_t count = end - begin;
    const std::size_t n_chunks = (count + kChunkRows - 1) / kChunkRows;

    std::vector<double> chunk_loss(n_chunks, 0.0);
    std::vector<std::vector<std::size_t>> chunk_preds(n_chunks);
    std::vector<ParamGrads> chunk_grads(want_grads ? n_chunks : 0);

    run_slots(n_chunks, [&](std::size_t s) {
        const std::size_t lo = begin + s * kChunkRows;
        const std::size_t hi = std::min(lo + kChunkRows, end);
        const Tensor3 chunk = gather_windows(data, idx, lo, hi);
        std::vector<std::size_t> chunk_labels(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) chunk_labels[i - lo] = labels[idx[i]];

        if (want_grads) {
            auto [logits, trace] = forward_sequence(params, chunk);
            const CceResult ce = softmax_xent_sum(logits, chunk_labels);
            chunk_loss[s] = ce.loss;
            chunk_preds[s] = argmax_rows(logits);
            chunk_grads[s] = backward_sequence(params, trace, ce.dlogits);
        } else {
            const Matrix logits = forward_logits(params, chunk);
            chunk_loss[s] = softmax_xent_sum(logits, chunk_labels).loss;
            chunk_preds[s] = argmax_rows(logits);
        }
    });

    PassResult res;
    res.preds.reserve(count);
    if (want_grads) res.grads = zeros_like(params);
    for (std::size_t s = 0; s < n_chunks; ++s) {
        res.loss_sum += chunk_loss[s];
        res.preds.insert(res.preds.end(), chunk_preds[s].begin(), chunk_preds[s].end());
        if (want_grads) {
            auto dst = param_arrays(res.grads);
            auto src = param_arrays(chunk_grads[s]);
            for (std::size_t a = 0; a < dst.size(); ++a) {
                std::vector<double>& d = *dst[a];
                const std::vector<double>& g = *src[a];
                for (std::size_t k = 0; k < d.size(); ++k) d[k] += g[k];
            }
        }
    }
    return res;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {
        {"variant", c.variant == Variant::stacked ? "stacked" : "bidirectional"},
        {"layer_cells", c.layer_cells},
        {"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"timesteps", c.timesteps},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"clip_global_norm",
         c.clip_global_norm ? nlohmann::json(*c.clip_global_norm) : nlohmann::json(nullptr)},
        {"early_stop_patience", c.early_stop_patience
                                    ? nlohmann::json(*c.early_stop_patience)
                                    : nlohmann::json(nullptr)},
    };
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "stacked") {
        c.variant = Variant::stacked;
    } else if (variant == "bidirectional") {
        c.variant = Variant::bidirectional;
    } else {
        throw IoError("model header names unknown variant '" + variant + "'");
    }
    c.layer_cells = j.at("layer_cells").get<std::vector<std::size_t>>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.timesteps = j.at("timesteps").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("clip_global_norm").is_null()) {
        c.clip_global_norm = j.at("clip_global_norm").get<double>();
    }
    if (!j.at("early_stop_patience").is_null()) {
        c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
    } else {
        c.early_stop_patience.reset();
    }
    return c;
}

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::size_t worker_threads() {
    if (const char* env = std::getenv("LBDMIDS_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? hc : 1;
}

ModelConfig preset_config(const std::string& dataset, Variant variant) {
    ModelConfig c;
    c.variant = variant;
    if (dataset == "unsw_nb15") {
        if (variant == Variant::stacked) {
            c.layer_cells = {40, 128, 128, 64};
            c.epochs = 50;
            c.learning_rate = 0.002;
        } else {
            c.layer_cells = {64};
            c.epochs = 50;
            c.learning_rate = 0.0015;
        }
    } else if (dataset == "bot_iot") {
        if (variant == Variant::stacked) {
            c.layer_cells = {32, 32};
            c.epochs = 5;
            c.learning_rate = 0.002;
        } else {
            c.layer_cells = {12};
            c.epochs = 5;
            c.learning_rate = 0.001;
        }
    } else {
        throw ConfigError("no preset for dataset '" + dataset +
                          "'; expected unsw_nb15 or bot_iot");
    }
    return c;
}

std::vector<std::string> validate_config(const ModelConfig& c) {
    std::vector<std::string> bad;
    if (c.layer_cells.empty()) bad.push_back("layer_cells must be nonempty");
    for (std::size_t cells : c.layer_cells) {
        if (cells == 0) {
            bad.push_back("layer cell counts must be at least 1");
            break;
        }
    }
    if (c.variant == Variant::bidirectional && c.layer_cells.size() != 1) {
        bad.push_back("bidirectional models use exactly one layer, got " +
                      std::to_string(c.layer_cells.size()));
    }
    if (c.epochs == 0) bad.push_back("epochs must be at least 1");
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
        bad.push_back("learning_rate must be positive and finite");
    }
    if (c.timesteps == 0) bad.push_back("timesteps must be at least 1");
    if (c.batch_size == 0) bad.push_back("batch_size must be at least 1");
    if (c.clip_global_norm && !(*c.clip_global_norm > 0.0)) {
        bad.push_back("clip_global_norm must be positive when set");
    }
    if (c.early_stop_patience && *c.early_stop_patience == 0) {
        bad.push_back("early_stop_patience must be at least 1 (omit to disable)");
    }
    return bad;
}

void require_valid(const ModelConfig& c) {
    const auto bad = validate_config(c);
    if (bad.empty()) return;
    std::string msg = "invalid model config: ";
    for (std::size_t i = 0; i < bad.size(); ++i) {
        if (i > 0) msg += "; ";
        msg += bad[i];
    }
    throw ConfigError(msg);
}

TrainedModel train(const PreprocessedDataset& train_set, const PreprocessedDataset& val_set,
                   const ModelConfig& config_in) {
    require_valid(config_in);
    const WindowedDataset& tr = train_set.windows;
    const WindowedDataset& va = val_set.windows;
    if (tr.tensor.samples == 0) throw DataError("train: training set holds no windows");
    if (va.tensor.samples == 0) throw DataError("train: validation set holds no windows");
    if (tr.tensor.features != va.tensor.features || tr.timesteps != va.timesteps) {
        throw DataError("train: train and validation tensors disagree on shape");
    }
    if (tr.class_names != va.class_names || train_set.class_names != val_set.class_names ||
        train_set.schema_name != val_set.schema_name) {
        throw DataError("train: train and validation sets come from different schemas");
    }
    if (!(train_set.stats == val_set.stats)) {
        throw DataError("train: partitions were normalized with different statistics");
    }

    ModelConfig cfg = config_in;
    cfg.timesteps = tr.timesteps; // the data is already windowed; record what it used

    NetworkShape shape;
    shape.variant = cfg.variant;
    shape.layer_cells = cfg.layer_cells;
    shape.input_width = tr.tensor.features;
    shape.num_classes = tr.class_names.size();

    LstmParams params = init_params(shape, cfg.seed);
    OptimizerState opt = make_optimizer(params, cfg.learning_rate);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    const std::size_t n_train = tr.tensor.samples;
    const std::size_t n_val = va.tensor.samples;
    const std::size_t k = tr.class_names.size();
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> val_order(n_val);
    std::iota(val_order.begin(), val_order.end(), 0);

    EpochHistory history;
    LstmParams best_params = params;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double epoch_loss_sum = 0.0;
        std::vector<std::size_t> truth, preds;
        truth.reserve(n_train);
        preds.reserve(n_train);

        std::size_t batch_index = 0;
        for (std::size_t lo = 0; lo < n_train; lo += cfg.batch_size, ++batch_index) {
            const std::size_t hi = std::min(lo + cfg.batch_size, n_train);
            PassResult res = run_pass(params, tr.tensor, tr.labels, order, lo, hi, true);
            const double batch_n = static_cast<double>(hi - lo);
            if (!std::isfinite(res.loss_sum)) {
                throw TrainingError("non-finite training loss at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            }
            epoch_loss_sum += res.loss_sum;
            for (std::size_t i = lo; i < hi; ++i) truth.push_back(tr.labels[order[i]]);
            preds.insert(preds.end(), res.preds.begin(), res.preds.end());

            for (auto* arr : param_arrays(res.grads)) {
                for (double& g : *arr) g /= batch_n;
            }
            if (cfg.clip_global_norm) clip_global_norm(res.grads, *cfg.clip_global_norm);
            adam_step(params, res.grads, opt);
        }

        EpochStats stats;
        stats.train_loss = epoch_loss_sum / static_cast<double>(n_train);
        stats.train_accuracy = report(confusion(truth, preds, k)).accuracy;

        PassResult val = run_pass(params, va.tensor, va.labels, val_order, 0, n_val, false);
        if (!std::isfinite(val.loss_sum)) {
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        stats.val_loss = val.loss_sum / static_cast<double>(n_val);
        stats.val_accuracy = report(confusion(va.labels, val.preds, k)).accuracy;
        history.push_back(stats);

        if (stats.val_loss < best_val_loss) {
            best_val_loss = stats.val_loss;
            best_params = params;
            epochs_since_best = 0;
        } else if (cfg.early_stop_patience && ++epochs_since_best >= *cfg.early_stop_patience) {
            break;
        }
    }

    TrainedModel model;
    model.params = std::move(best_params);
    model.config = cfg;
    model.stats = train_set.stats;
    model.class_names = tr.class_names;
    model.schema_name = train_set.schema_name;
    model.history = std::move(history);
    return model;
}

Predictions predict(const TrainedModel& model, const Tensor3& windows) {
    const LstmParams& p = model.params;
    if (windows.samples == 0) throw DataError("predict: no windows");
    if (windows.features != p.input_width()) {
        throw DimensionError("predict: window feature width " +
                             std::to_string(windows.features) + " does not match model input " +
                             std::to_string(p.input_width()));
    }
    if (windows.timesteps != model.config.timesteps) {
        throw DimensionError("predict: window timesteps " + std::to_string(windows.timesteps) +
                             " do not match model timesteps " +
                             std::to_string(model.config.timesteps));
    }

    const std::size_t n = windows.samples;
    Predictions out;
    out.labels.assign(n, 0);
    out.probabilities = Matrix(n, p.num_classes());

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t n_chunks = (n + kChunkRows - 1) / kChunkRows;
    run_slots(n_chunks, [&](std::size_t s) {
        const std::size_t lo = s * kChunkRows;
        const std::size_t hi = std::min(lo + kChunkRows, n);
        const Tensor3 chunk = gather_windows(windows, idx, lo, hi);
        const Matrix probs = softmax_rows(forward_logits(p, chunk));
        const auto preds = argmax_rows(probs);
        for (std::size_t i = lo; i < hi; ++i) {
            out.labels[i] = preds[i - lo];
            std::copy(probs.row(i - lo), probs.row(i - lo) + probs.cols(),
                      out.probabilities.row(i));
        }
    });
    return out;
}

Predictions predict_raw(const TrainedModel& model, const Tensor3& raw_windows) {
    if (raw_windows.features != model.stats.mean.size()) {
        throw DimensionError("predict: window feature width " +
                             std::to_string(raw_windows.features) +
                             " does not match model statistics (" +
                             std::to_string(model.stats.mean.size()) + " columns)");
    }
    Tensor3 z = raw_windows;
    const std::size_t f_width = z.features;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const std::size_t f = i % f_width;
        const double sd = model.stats.stddev[f];
        z.data[i] = (sd == 0.0) ? 0.0 : (z.data[i] - model.stats.mean[f]) / sd;
    }
    return predict(model, z);
}

void save_model(const TrainedModel& model, const std::string& path) {
    const LstmParams& p = model.params;
    if (model.stats.mean.size() != p.input_width()) {
        throw DataError("save_model: stats cover " + std::to_string(model.stats.mean.size()) +
                        " columns, model expects " + std::to_string(p.input_width()));
    }
    if (model.class_names.size() != p.num_classes()) {
        throw DataError("save_model: class name count does not match the dense head");
    }

    nlohmann::json history = nlohmann::json::array();
    for (const EpochStats& e : model.history) {
        history.push_back({e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy});
    }
    const nlohmann::json header = {
        {"config", config_to_json(model.config)},
        {"schema", model.schema_name},
        {"class_names", model.class_names},
        {"stats",
         {{"n", model.stats.n}, {"mean", model.stats.mean}, {"stddev", model.stats.stddev}}},
        {"input_width", p.input_width()},
        {"num_classes", p.num_classes()},
        {"history", history},
    };
    const std::string htext = header.dump();

    std::vector<std::uint8_t> buf;
    append_bytes(buf, kModelMagic, 4);
    append_u32(buf, kModelVersion);
    append_u32(buf, static_cast<std::uint32_t>(htext.size()));
    append_bytes(buf, htext.data(), htext.size());
    for (const auto* arr : param_arrays(p)) {
        for (double v : *arr) append_f64(buf, v);
    }
    append_u64(buf, fnv1a64(buf.data(), buf.size()));
    atomic_write_file(path, buf);
}

TrainedModel load_model(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 20) throw IoError(path + ": truncated model file");

    const std::uint64_t computed = fnv1a64(bytes.data(), bytes.size() - 8);
    ByteReader tail{bytes, bytes.size() - 8};
    const std::uint64_t stored = tail.u64();
    if (computed != stored) {
        throw IoError(path + ": checksum mismatch, file is corrupt (stored " +
                      std::to_string(stored) + ", computed " + std::to_string(computed) + ")");
    }

    ByteReader r{bytes};
    if (r.bytes(4) != std::string(kModelMagic, 4)) {
        throw IoError(path + ": not a model file (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kModelVersion) {
        throw IoError(path + ": unsupported model format version " + std::to_string(version) +
                      "; this build reads version " + std::to_string(kModelVersion));
    }

    TrainedModel model;
    std::size_t input_width = 0, num_classes = 0;
    try {
        const nlohmann::json header = nlohmann::json::parse(r.bytes(r.u32()));
        model.config = config_from_json(header.at("config"));
        model.schema_name = header.at("schema").get<std::string>();
        model.class_names = header.at("class_names").get<std::vector<std::string>>();
        model.stats.n = header.at("stats").at("n").get<std::size_t>();
        model.stats.mean = header.at("stats").at("mean").get<std::vector<double>>();
        model.stats.stddev = header.at("stats").at("stddev").get<std::vector<double>>();
        input_width = header.at("input_width").get<std::size_t>();
        num_classes = header.at("num_classes").get<std::size_t>();
        for (const auto& row : header.at("history")) {
            if (row.size() != 4) throw IoError(path + ": malformed history entry");
            model.history.push_back(
                {row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                 row[3].get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed model header: " + e.what());
    }

    require_valid(model.config);
    if (model.stats.mean.size() != input_width ||
        model.stats.stddev.size() != input_width ||
        model.class_names.size() != num_classes || input_width == 0 || num_classes == 0) {
        throw IoError(path + ": model header is internally inconsistent");
    }

    NetworkShape shape;
    shape.variant = model.config.variant;
    shape.layer_cells = model.config.layer_cells;
    shape.input_width = input_width;
    shape.num_classes = num_classes;
    model.params = init_params(shape, 0);
    for (auto* arr : param_arrays(model.params)) {
        for (double& v : *arr) v = r.f64();
    }
    if (r.remaining() != 8) {
        throw IoError(path + ": unexpected trailing bytes after weight arrays");
    }
    return model;
}

std::string history_csv(const EpochHistory& history) {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const EpochStats& e = history[i];
        out += std::to_string(i + 1) + "," + full_precision(e.train_loss) + "," +
               full_precision(e.train_accuracy) + "," + full_precision(e.val_loss) + "," +
               full_precision(e.val_accuracy) + "\n";
    }
    return out;
}

} // namespace lbdmids
