#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "data.hpp"
#include "losses.hpp"
#include "qgen.hpp"
#include "trainer.hpp"

namespace ihqgan::config {

/// Flat key=value run configuration. Defaults are the published
/// hyperparameters; every key can come from a config file (# comments
/// allowed) with explicit CLI flags taking precedence. Unknown keys are
/// rejected. IHQGAN_SEED serves as the seed fallback when neither a flag
/// nor a config entry sets one.
struct RunConfig {
    std::string task = "image_denoising";
    int label = 0;
    std::uint64_t seed = 42;
    int epochs = 50;
    int batch_size = 10;
    int n_c = 5;
    double lr_gen = 0.01;
    double lr_critic = 0.0002;
    double eps = 10.0;
    double eta = 20.0;
    double rho = 300.0;
    double lambda = 10.0;
    std::string decode = "max";          // max | sum
    std::string adv_sign = "standard";   // standard | literal
    bool post = true;
    bool train_acnns = true;
    int limit_train = 0;
    int sample_interval = 1;
    double noise_sigma = 0.25;
    double canny_sigma = 1.0;
    double canny_low_pct = 70.0;
    double canny_high_pct = 90.0;
    std::string mnist_dir;
    std::string dataset_dir;
    std::string out_dir;
    std::string checkpoint;

    void apply(const std::string& key, const std::string& value);

    qgen::DecodeRule decode_rule() const {
        if (decode == "max") return qgen::DecodeRule::MaxNorm;
        if (decode == "sum") return qgen::DecodeRule::SumNorm;
        throw std::invalid_argument("config: decode must be 'max' or 'sum', got '" + decode + "'");
    }

    losses::AdvSign adv_sign_mode() const {
        if (adv_sign == "standard") return losses::AdvSign::Standard;
        if (adv_sign == "literal") return losses::AdvSign::Literal;
        throw std::invalid_argument("config: adv_sign must be 'standard' or 'literal', got '" + adv_sign +
                                    "'");
    }

    data::Task task_id() const { return data::parse_task(task); }

    data::DataParams data_params() const {
        data::DataParams p;
        p.noise_sigma = noise_sigma;
        p.canny.sigma = canny_sigma;
        p.canny.low_pct = canny_low_pct;
        p.canny.high_pct = canny_high_pct;
        return p;
    }

    trainer::TrainConfig train_config() const {
        trainer::TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.n_critic = n_c;
        t.lr_gen = lr_gen;
        t.lr_critic = lr_critic;
        t.weights = losses::LossWeights{lambda, eps, eta, rho};
        t.adv_sign = adv_sign_mode();
        t.decode = decode_rule();
        t.train_acnns = train_acnns;
        t.seed = seed;
        t.limit_train = limit_train;
        t.sample_interval = sample_interval;
        return t;
    }

    /// Full effective configuration, written as the run manifest.
    std::string manifest(const std::string& command) const {
        std::ostringstream out;
        out << "command=" << command << "\n";
        out << "task=" << task << "\n";
        out << "label=" << label << "\n";
        out << "seed=" << seed << "\n";
        out << "epochs=" << epochs << "\n";
        out << "batch_size=" << batch_size << "\n";
        out << "n_c=" << n_c << "\n";
        out << "lr_gen=" << lr_gen << "\n";
        out << "lr_critic=" << lr_critic << "\n";
        out << "eps=" << eps << "\n";
        out << "eta=" << eta << "\n";
        out << "rho=" << rho << "\n";
        out << "lambda=" << lambda << "\n";
        out << "decode=" << decode << "\n";
        out << "adv_sign=" << adv_sign << "\n";
        out << "post=" << (post ? "true" : "false") << "\n";
        out << "train_acnns=" << (train_acnns ? "true" : "false") << "\n";
        out << "limit_train=" << limit_train << "\n";
        out << "sample_interval=" << sample_interval << "\n";
        out << "noise_sigma=" << noise_sigma << "\n";
        out << "canny_sigma=" << canny_sigma << "\n";
        out << "canny_low_pct=" << canny_low_pct << "\n";
        out << "canny_high_pct=" << canny_high_pct << "\n";
        out << "mnist_dir=" << mnist_dir << "\n";
        out << "dataset_dir=" << dataset_dir << "\n";
        out << "out_dir=" << out_dir << "\n";
        out << "checkpoint=" << checkpoint << "\n";
        return out.str();
    }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

} // namespace detail

inline void RunConfig::apply(const std::string& key, const std::string& value) {
    try {
        if (key == "task") task = value;
        else if (key == "label") label = std::stoi(value);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "epochs") epochs = std::stoi(value);
        else if (key == "batch_size") batch_size = std::stoi(value);
        else if (key == "n_c") n_c = std::stoi(value);
        else if (key == "lr_gen") lr_gen = std::stod(value);
        else if (key == "lr_critic") lr_critic = std::stod(value);
        else if (key == "eps") eps = std::stod(value);
        else if (key == "eta") eta = std::stod(value);
        else if (key == "rho") rho = std::stod(value);
        else if (key == "lambda") lambda = std::stod(value);
        else if (key == "decode") decode = value;
        else if (key == "adv_sign") adv_sign = value;
        else if (key == "post") post = detail::parse_bool(value, key);
        else if (key == "train_acnns") train_acnns = detail::parse_bool(value, key);
        else if (key == "limit_train") limit_train = std::stoi(value);
        else if (key == "sample_interval") sample_interval = std::stoi(value);
        else if (key == "noise_sigma") noise_sigma = std::stod(value);
        else if (key == "canny_sigma") canny_sigma = std::stod(value);
        else if (key == "canny_low_pct") canny_low_pct = std::stod(value);
        else if (key == "canny_high_pct") canny_high_pct = std::stod(value);
        else if (key == "mnist_dir") mnist_dir = value;
        else if (key == "dataset_dir") dataset_dir = value;
        else if (key == "out_dir") out_dir = value;
        else if (key == "checkpoint") checkpoint = value;
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: cannot parse value '" + value + "' for key '" + key + "'");
    }
}

/// key=value lines, # comments, blank lines ignored.
inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open config file " + path.string());
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const auto from = s.find_first_not_of(" \t\r");
        const auto to = s.find_last_not_of(" \t\r");
        return from == std::string::npos ? std::string() : s.substr(from, to - from + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not a key=value pair: '" + line + "'");
        }
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return entries;
}

/// applies file entries, then the environment seed fallback; explicit CLI
/// flags are applied afterwards by the caller and win.
inline void load_into(RunConfig& cfg, const std::filesystem::path& config_path, bool seed_was_set) {
    bool seed_in_file = false;
    if (!config_path.empty()) {
        for (const auto& [k, v] : parse_config_file(config_path)) {
            cfg.apply(k, v);
            if (k == "seed") seed_in_file = true;
        }
    }
    if (!seed_was_set && !seed_in_file) {
        if (const char* env = std::getenv("IHQGAN_SEED")) {
            cfg.apply("seed", env);
        }
    }
}

} // namespace ihqgan::config
