#include "otc/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace otc {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& value, const std::string& range) {
    throw std::invalid_argument("config: " + field + " = " + value + " invalid, " + range);
}

void check(bool ok, const std::string& field, double value, const std::string& range) {
    if (!ok) {
        std::ostringstream oss;
        oss << value;
        fail(field, oss.str(), range);
    }
}

}  // namespace

void validate(const ExperimentConfig& c) {
    check(c.K >= 2, "K", c.K, "must be >= 2");
    check(c.N >= c.K, "N", c.N, "must be >= K");
    check(c.dim >= 1, "dim", c.dim, "must be >= 1");
    check(c.rho >= 1.0, "rho", c.rho, "must be >= 1");
    check(c.gamma >= 0.0 && c.gamma < 1.0, "gamma", c.gamma, "must be in [0, 1)");
    check(c.lambda_ema >= 0.0 && c.lambda_ema <= 1.0, "lambda_ema", c.lambda_ema, "must be in [0, 1]");
    check(c.tau1 > 0.0 && c.tau1 < 1.0, "tau1", c.tau1, "must be in (0, 1)");
    check(c.lambda_sw >= 0.0, "lambda_sw", c.lambda_sw, "must be >= 0");
    check(c.lambda_c >= 0.0, "lambda_c", c.lambda_c, "must be >= 0");
    check(c.warmup_epochs >= 0, "warmup_epochs", c.warmup_epochs, "must be >= 0");
    check(c.ssl_rounds >= 0, "ssl_rounds", c.ssl_rounds, "must be >= 0");
    check(c.lr >= 0.0, "lr", c.lr, "must be >= 0");
    check(c.batch_size >= 1, "batch_size", c.batch_size, "must be >= 1");
    check(c.sinkhorn_eps > 0.0, "sinkhorn_eps", c.sinkhorn_eps, "must be > 0");
    check(c.sinkhorn_iters >= 1, "sinkhorn_iters", c.sinkhorn_iters, "must be >= 1");
    check(c.sinkhorn_tol > 0.0, "sinkhorn_tol", c.sinkhorn_tol, "must be > 0");
    check(c.cluster_separation > 0.0, "cluster_separation", c.cluster_separation, "must be > 0");
    check(c.cluster_stddev >= 0.0, "cluster_stddev", c.cluster_stddev, "must be >= 0");
    check(c.test_per_class >= 1, "test_per_class", c.test_per_class, "must be >= 1");
    check(c.weak_sigma >= 0.0, "weak_sigma", c.weak_sigma, "must be >= 0");
    check(c.strong_sigma >= c.weak_sigma, "strong_sigma", c.strong_sigma, "must be >= weak_sigma");
    check(c.strong_mask_frac >= 0.0 && c.strong_mask_frac < 1.0, "strong_mask_frac", c.strong_mask_frac,
          "must be in [0, 1)");
    check(c.contrast_temperature > 0.0, "contrast_temperature", c.contrast_temperature, "must be > 0");
    check(c.select_refresh_every >= 1, "select_refresh_every", c.select_refresh_every, "must be >= 1");
}

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

    ExperimentConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "K") c.K = value.get<int>();
            else if (key == "N") c.N = value.get<int>();
            else if (key == "dim") c.dim = value.get<int>();
            else if (key == "rho") c.rho = value.get<double>();
            else if (key == "gamma") c.gamma = value.get<double>();
            else if (key == "lambda_ema") c.lambda_ema = value.get<double>();
            else if (key == "tau1") c.tau1 = value.get<double>();
            else if (key == "lambda_sw") c.lambda_sw = value.get<double>();
            else if (key == "lambda_c") c.lambda_c = value.get<double>();
            else if (key == "warmup_epochs") c.warmup_epochs = value.get<int>();
            else if (key == "ssl_rounds") c.ssl_rounds = value.get<int>();
            else if (key == "lr") c.lr = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "sinkhorn_eps") c.sinkhorn_eps = value.get<double>();
            else if (key == "sinkhorn_iters") c.sinkhorn_iters = value.get<int>();
            else if (key == "sinkhorn_tol") c.sinkhorn_tol = value.get<double>();
            else if (key == "cluster_separation") c.cluster_separation = value.get<double>();
            else if (key == "cluster_stddev") c.cluster_stddev = value.get<double>();
            else if (key == "test_per_class") c.test_per_class = value.get<int>();
            else if (key == "weak_sigma") c.weak_sigma = value.get<double>();
            else if (key == "strong_sigma") c.strong_sigma = value.get<double>();
            else if (key == "strong_mask_frac") c.strong_mask_frac = value.get<double>();
            else if (key == "contrast_temperature") c.contrast_temperature = value.get<double>();
            else if (key == "select_refresh_every") c.select_refresh_every = value.get<int>();
            else throw std::invalid_argument("config: unknown key \"" + key + "\"");
        } catch (const json::exception& e) {
            throw std::invalid_argument("config: key \"" + key + "\": " + e.what());
        }
    }
    validate(c);
    return c;
}

std::string config_to_json_text(const ExperimentConfig& c) {
    json j;
    j["K"] = c.K;
    j["N"] = c.N;
    j["dim"] = c.dim;
    j["rho"] = c.rho;
    j["gamma"] = c.gamma;
    j["lambda_ema"] = c.lambda_ema;
    j["tau1"] = c.tau1;
    j["lambda_sw"] = c.lambda_sw;
    j["lambda_c"] = c.lambda_c;
    j["warmup_epochs"] = c.warmup_epochs;
    j["ssl_rounds"] = c.ssl_rounds;
    j["lr"] = c.lr;
    j["seed"] = c.seed;
    j["batch_size"] = c.batch_size;
    j["sinkhorn_eps"] = c.sinkhorn_eps;
    j["sinkhorn_iters"] = c.sinkhorn_iters;
    j["sinkhorn_tol"] = c.sinkhorn_tol;
    j["cluster_separation"] = c.cluster_separation;
    j["cluster_stddev"] = c.cluster_stddev;
    j["test_per_class"] = c.test_per_class;
    j["weak_sigma"] = c.weak_sigma;
    j["strong_sigma"] = c.strong_sigma;
    j["strong_mask_frac"] = c.strong_mask_frac;
    j["contrast_temperature"] = c.contrast_temperature;
    j["select_refresh_every"] = c.select_refresh_every;
    return j.dump(2);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

}  // namespace otc
