#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "image.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "nets.hpp"
#include "postprocess.hpp"
#include "qgen.hpp"
#include "rng.hpp"
#include "tensorio.hpp"

namespace ihqgan::trainer {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 10;            // m
    int n_critic = 5;               // critic iterations per generator iteration
    double lr_gen = 0.01;           // quantum generators
    double lr_critic = 0.0002;      // classical critics and ACNNs
    double beta1 = 0.0;
    double beta2 = 0.9;
    losses::LossWeights weights;
    losses::AdvSign adv_sign = losses::AdvSign::Standard;
    qgen::DecodeRule decode = qgen::DecodeRule::MaxNorm;
    bool train_acnns = true;        // freeze to reproduce the literal printed algorithm
    std::uint64_t seed = 42;
    int limit_train = 0;            // cap on train images per domain, 0 = all
    int sample_interval = 1;        // epochs between sample grids, 0 = never
    int checkpoint_interval = 1;    // epochs between checkpoints

    void validate() const {
        if (epochs < 1 || batch_size < 1 || n_critic < 1) {
            throw std::invalid_argument("trainer: epochs, batch size, and n_c must be at least 1");
        }
        if (lr_gen <= 0 || lr_critic <= 0) {
            throw std::invalid_argument("trainer: learning rates must be positive");
        }
        weights.validate();
    }
};

struct CriticRecord {
    int epoch = 0;
    std::uint64_t batch = 0;
    double loss_dy = 0.0;
    double loss_dx = 0.0;
};

struct GenRecord {
    int epoch = 0;
    std::uint64_t batch = 0;
    double adv_g = 0.0, cyc_g = 0.0, iqa_g = 0.0, total_g = 0.0;
    double adv_f = 0.0, cyc_f = 0.0, iqa_f = 0.0, total_f = 0.0;
};

struct History {
    std::vector<CriticRecord> critic;
    std::vector<GenRecord> gen;
};

/// All mutable training state. G and F never hold distinct parameter
/// storage: `shared` is the one angle tensor, read forward by G and through
/// the inverse view by F. Each direction keeps its own Adam moments over
/// that tensor, mirroring the two optimizer invocations of the published
/// training loop.
struct TrainState {
    qgen::GeneratorParams shared;
    nets::DenseNet d_x, d_y;        // critics
    nets::DenseNet q, r;            // assisted networks
    nets::AdamState adam_gen_g, adam_gen_f, adam_dx, adam_dy, adam_q, adam_r;
    std::uint64_t batch_counter = 0;
    int epochs_done = 0;
    Rng rng{0};
    History history;

    static TrainState init(const TrainConfig& cfg) {
        TrainState st;
        st.rng = Rng(cfg.seed);
        st.shared = qgen::GeneratorParams::random(st.rng);
        st.d_x = nets::make_critic(st.rng);
        st.d_y = nets::make_critic(st.rng);
        st.q = nets::make_acnn(st.rng);
        st.r = nets::make_acnn(st.rng);
        st.adam_gen_g = nets::AdamState::create(qgen::kTotalAngles, cfg.lr_gen, cfg.beta1, cfg.beta2);
        st.adam_gen_f = nets::AdamState::create(qgen::kTotalAngles, cfg.lr_gen, cfg.beta1, cfg.beta2);
        st.adam_dx = nets::AdamState::create(st.d_x.param_count(), cfg.lr_critic, cfg.beta1, cfg.beta2);
        st.adam_dy = nets::AdamState::create(st.d_y.param_count(), cfg.lr_critic, cfg.beta1, cfg.beta2);
        st.adam_q = nets::AdamState::create(st.q.param_count(), cfg.lr_critic, cfg.beta1, cfg.beta2);
        st.adam_r = nets::AdamState::create(st.r.param_count(), cfg.lr_critic, cfg.beta1, cfg.beta2);
        return st;
    }

    std::size_t generator_parameter_count() const { return shared.angles.size(); }

    void assert_finite() const {
        for (double a : shared.angles) {
            if (!std::isfinite(a)) throw NumericalError("trainer: generator parameter became non-finite");
        }
        for (const nets::DenseNet* net : {&d_x, &d_y, &q, &r}) {
            if (!net->params_finite()) throw NumericalError("trainer: network parameter became non-finite");
        }
    }
};

namespace detail {

inline void adam_step_net(nets::DenseNet& net, std::span<const double> grads, nets::AdamState& state) {
    std::vector<double> flat = net.flatten_params();
    nets::adam_step(flat, grads, state);
    net.unflatten_params(flat);
}

inline std::vector<ImageTensor> translate_batch(std::span<const ImageTensor> batch,
                                                const qgen::GeneratorParams& params, qgen::Direction dir,
                                                qgen::DecodeRule rule) {
    std::vector<ImageTensor> out;
    out.reserve(batch.size());
    for (const ImageTensor& img : batch) out.push_back(qgen::translate(img, params, dir, rule));
    return out;
}

} // namespace detail

/// One critic round (both critics), Adam-updated on the WGAN-GP objective;
/// generator parameters are read but never written. Increments the batch
/// counter.
inline void train_step_critics(TrainState& st, const TrainConfig& cfg, std::span<const ImageTensor> batch_x,
                               std::span<const ImageTensor> batch_y) {
    const std::size_t m = batch_x.size();
    if (m == 0 || batch_y.size() != m) throw std::invalid_argument("trainer: bad critic batch");

    // D_Y judges real y against G(x)
    const auto fake_y = detail::translate_batch(batch_x, st.shared, qgen::Direction::Forward, cfg.decode);
    std::vector<double> xis(m);
    for (double& xi : xis) xi = st.rng.uniform();
    const auto res_y = losses::critic_loss(st.d_y, batch_y, fake_y, cfg.weights.lambda, xis);
    detail::adam_step_net(st.d_y, res_y.param_grads, st.adam_dy);

    // D_X judges real x against F(y)
    const auto fake_x = detail::translate_batch(batch_y, st.shared, qgen::Direction::Inverse, cfg.decode);
    for (double& xi : xis) xi = st.rng.uniform();
    const auto res_x = losses::critic_loss(st.d_x, batch_x, fake_x, cfg.weights.lambda, xis);
    detail::adam_step_net(st.d_x, res_x.param_grads, st.adam_dx);

    st.batch_counter += 1;
    st.history.critic.push_back({st.epochs_done + 1, st.batch_counter, res_y.value, res_x.value});
    st.assert_finite();
}

namespace detail {

struct GenSideResult {
    double adv = 0.0, cyc = 0.0, iqa = 0.0, total = 0.0;
};

// Shared implementation of one generator-side update (G with Q against D_Y,
// or F with R against D_X). Gradients flow into the shared angle tensor via
// the direction's own Adam moments; the ACNN trains on the cycle and IQA
// parts of the same objective.
inline GenSideResult generator_side_update(TrainState& st, const TrainConfig& cfg,
                                           std::span<const ImageTensor> sources, qgen::Direction dir,
                                           nets::DenseNet& critic, nets::DenseNet& acnn,
                                           nets::AdamState& adam_gen, nets::AdamState& adam_acnn) {
    const std::size_t m = sources.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    const losses::LossWeights& w = cfg.weights;

    GenSideResult out;
    std::vector<double> gen_grads(qgen::kTotalAngles, 0.0);
    std::vector<double> acnn_grads(acnn.param_count(), 0.0);
    std::vector<ImageTensor> fakes(m);

    for (std::size_t i = 0; i < m; ++i) {
        const ImageTensor& src = sources[i];
        fakes[i] = qgen::translate(src, st.shared, dir, cfg.decode);

        const std::vector<double> recon_v = nets::acnn_forward(acnn, fakes[i].pixels);
        ImageTensor recon;
        std::copy(recon_v.begin(), recon_v.end(), recon.pixels.begin());

        out.cyc += inv_m * losses::cycle_l1_single(recon, src);
        out.iqa += inv_m * losses::iqa_loss(recon, src);

        // upstream at the reconstruction: eta * dL1 + rho * d(1 - SSIM)
        const ImageTensor l1_grad = losses::cycle_l1_grad(recon, src);
        const ImageTensor ssim_grad = losses::ssim_grad_a(recon, src);
        std::vector<double> up_recon(kImagePixels);
        for (int j = 0; j < kImagePixels; ++j) {
            up_recon[j] = inv_m * (w.eta * l1_grad.pixels[j] - w.rho * ssim_grad.pixels[j]);
        }
        const nets::BackpropResult acnn_back = nets::acnn_backward(acnn, fakes[i].pixels, up_recon);
        for (std::size_t p = 0; p < acnn_grads.size(); ++p) acnn_grads[p] += acnn_back.param_grads[p];

        // adversarial upstream at the fake image; the literal printed
        // algorithm carries +eps D(fake) inside L^G, standard WGAN-GP
        // minimizes -eps D(fake)
        const double adv_sign = cfg.adv_sign == losses::AdvSign::Standard ? -1.0 : 1.0;
        const std::vector<double> critic_grad = nets::critic_input_grad(critic, fakes[i].pixels);

        ImageTensor upstream;
        for (int j = 0; j < kImagePixels; ++j) {
            upstream.pixels[j] = acnn_back.input_grad[j] + adv_sign * w.eps * inv_m * critic_grad[j];
        }
        const qgen::GeneratorGrad g = qgen::generator_grad(src, st.shared, dir, upstream, cfg.decode);
        for (std::size_t p = 0; p < gen_grads.size(); ++p) gen_grads[p] += g.angle_grads[p];
    }

    out.adv = losses::gen_adversarial(critic, fakes);
    if (cfg.adv_sign == losses::AdvSign::Literal) out.adv = -out.adv;
    out.total = losses::total_gen_loss(out.adv, out.cyc, out.iqa, w);

    nets::adam_step(st.shared.angles, gen_grads, adam_gen);
    if (cfg.train_acnns) adam_step_net(acnn, acnn_grads, adam_acnn);
    return out;
}

} // namespace detail

/// One generator round: G's objective updates the shared tensor through the
/// G-side Adam state (plus Q), then F's objective updates the same tensor
/// through the F-side state (plus R). The explicit parameter-sync
/// assignments of the published algorithm hold implicitly because the
/// storage is shared. Callers fire this when batch_counter % n_c == 0.
inline void train_step_generators(TrainState& st, const TrainConfig& cfg,
                                  std::span<const ImageTensor> batch_x,
                                  std::span<const ImageTensor> batch_y) {
    const auto g = detail::generator_side_update(st, cfg, batch_x, qgen::Direction::Forward, st.d_y, st.q,
                                                 st.adam_gen_g, st.adam_q);
    const auto f = detail::generator_side_update(st, cfg, batch_y, qgen::Direction::Inverse, st.d_x, st.r,
                                                 st.adam_gen_f, st.adam_r);
    st.history.gen.push_back({st.epochs_done + 1, st.batch_counter, g.adv, g.cyc, g.iqa, g.total, f.adv,
                              f.cyc, f.iqa, f.total});
    st.assert_finite();
}

namespace detail {

inline void write_history_csv(const History& h, const std::filesystem::path& dir) {
    {
        std::ofstream out(dir / "critic_history.csv", std::ios::trunc);
        out << "epoch,batch,loss_dy,loss_dx\n";
        char buf[128];
        for (const CriticRecord& r : h.critic) {
            std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%.17g\n", r.epoch,
                          static_cast<unsigned long long>(r.batch), r.loss_dy, r.loss_dx);
            out << buf;
        }
    }
    {
        std::ofstream out(dir / "gen_history.csv", std::ios::trunc);
        out << "epoch,batch,adv_g,cyc_g,iqa_g,total_g,adv_f,cyc_f,iqa_f,total_f\n";
        char buf[256];
        for (const GenRecord& r : h.gen) {
            std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          r.epoch, static_cast<unsigned long long>(r.batch), r.adv_g, r.cyc_g, r.iqa_g,
                          r.total_g, r.adv_f, r.cyc_f, r.iqa_f, r.total_f);
            out << buf;
        }
    }
}

inline History read_history_csv(const std::filesystem::path& dir) {
    History h;
    auto split = [](const std::string& line) {
        std::vector<std::string> parts;
        std::istringstream in(line);
        std::string f;
        while (std::getline(in, f, ',')) parts.push_back(f);
        return parts;
    };
    std::ifstream cr(dir / "critic_history.csv");
    std::string line;
    std::getline(cr, line);   // header
    while (std::getline(cr, line)) {
        const auto p = split(line);
        if (p.size() != 4) continue;
        h.critic.push_back({std::stoi(p[0]), std::stoull(p[1]), std::stod(p[2]), std::stod(p[3])});
    }
    std::ifstream gr(dir / "gen_history.csv");
    std::getline(gr, line);
    while (std::getline(gr, line)) {
        const auto p = split(line);
        if (p.size() != 10) continue;
        h.gen.push_back({std::stoi(p[0]), std::stoull(p[1]), std::stod(p[2]), std::stod(p[3]),
                         std::stod(p[4]), std::stod(p[5]), std::stod(p[6]), std::stod(p[7]), std::stod(p[8]),
                         std::stod(p[9])});
    }
    return h;
}

inline void save_net(const nets::DenseNet& net, const std::filesystem::path& path) {
    const auto flat = net.flatten_params();
    const std::uint64_t dims[] = {flat.size()};
    tensorio::save_tensor(path, dims, flat);
}

inline void load_net(nets::DenseNet& net, const std::filesystem::path& path) {
    const std::uint64_t dims[] = {net.param_count()};
    net.unflatten_params(tensorio::load_tensor_checked(path, dims));
}

inline void save_adam(const nets::AdamState& s, const std::filesystem::path& path) {
    std::vector<double> payload;
    payload.reserve(2 * s.m.size());
    payload.insert(payload.end(), s.m.begin(), s.m.end());
    payload.insert(payload.end(), s.v.begin(), s.v.end());
    const std::uint64_t dims[] = {2, s.m.size()};
    tensorio::save_tensor(path, dims, payload);
}

inline void load_adam(nets::AdamState& s, const std::filesystem::path& path) {
    const std::uint64_t dims[] = {2, s.m.size()};
    const auto payload = tensorio::load_tensor_checked(path, dims);
    std::copy_n(payload.begin(), s.m.size(), s.m.begin());
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(s.m.size()), s.v.size(), s.v.begin());
}

} // namespace detail

/// Writes a self-contained, resumable checkpoint directory (parameters,
/// optimizer moments, RNG stream, history). The directory is staged under a
/// .tmp suffix and renamed into place.
inline void save_checkpoint(const TrainState& st, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path tmp = dir.string() + ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    st.shared.save(tmp / "generator.bin");
    detail::save_net(st.d_x, tmp / "critic_x.bin");
    detail::save_net(st.d_y, tmp / "critic_y.bin");
    detail::save_net(st.q, tmp / "acnn_q.bin");
    detail::save_net(st.r, tmp / "acnn_r.bin");
    detail::save_adam(st.adam_gen_g, tmp / "adam_gen_g.bin");
    detail::save_adam(st.adam_gen_f, tmp / "adam_gen_f.bin");
    detail::save_adam(st.adam_dx, tmp / "adam_dx.bin");
    detail::save_adam(st.adam_dy, tmp / "adam_dy.bin");
    detail::save_adam(st.adam_q, tmp / "adam_q.bin");
    detail::save_adam(st.adam_r, tmp / "adam_r.bin");
    {
        std::ofstream out(tmp / "rng.txt", std::ios::trunc);
        out << st.rng.serialize() << "\n";
    }
    {
        std::ofstream out(tmp / "meta.txt", std::ios::trunc);
        out << "epochs_done=" << st.epochs_done << "\n";
        out << "batch_counter=" << st.batch_counter << "\n";
        out << "adam_t_gen_g=" << st.adam_gen_g.t << "\n";
        out << "adam_t_gen_f=" << st.adam_gen_f.t << "\n";
        out << "adam_t_dx=" << st.adam_dx.t << "\n";
        out << "adam_t_dy=" << st.adam_dy.t << "\n";
        out << "adam_t_q=" << st.adam_q.t << "\n";
        out << "adam_t_r=" << st.adam_r.t << "\n";
    }
    detail::write_history_csv(st.history, tmp);

    fs::remove_all(dir);
    fs::rename(tmp, dir);
}

inline TrainState load_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg) {
    TrainState st = TrainState::init(cfg);
    st.shared = qgen::GeneratorParams::load(dir / "generator.bin");
    detail::load_net(st.d_x, dir / "critic_x.bin");
    detail::load_net(st.d_y, dir / "critic_y.bin");
    detail::load_net(st.q, dir / "acnn_q.bin");
    detail::load_net(st.r, dir / "acnn_r.bin");
    detail::load_adam(st.adam_gen_g, dir / "adam_gen_g.bin");
    detail::load_adam(st.adam_gen_f, dir / "adam_gen_f.bin");
    detail::load_adam(st.adam_dx, dir / "adam_dx.bin");
    detail::load_adam(st.adam_dy, dir / "adam_dy.bin");
    detail::load_adam(st.adam_q, dir / "adam_q.bin");
    detail::load_adam(st.adam_r, dir / "adam_r.bin");

    std::ifstream rng_in(dir / "rng.txt");
    std::string rng_state((std::istreambuf_iterator<char>(rng_in)), std::istreambuf_iterator<char>());
    st.rng.deserialize(rng_state);

    std::ifstream meta(dir / "meta.txt");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    st.epochs_done = std::stoi(kv.at("epochs_done"));
    st.batch_counter = std::stoull(kv.at("batch_counter"));
    st.adam_gen_g.t = std::stoull(kv.at("adam_t_gen_g"));
    st.adam_gen_f.t = std::stoull(kv.at("adam_t_gen_f"));
    st.adam_dx.t = std::stoull(kv.at("adam_t_dx"));
    st.adam_dy.t = std::stoull(kv.at("adam_t_dy"));
    st.adam_q.t = std::stoull(kv.at("adam_t_q"));
    st.adam_r.t = std::stoull(kv.at("adam_t_r"));
    st.history = detail::read_history_csv(dir);
    return st;
}

namespace detail {

inline void write_sample_grids(const TrainState& st, const TrainConfig& cfg, const data::SubDataset& ds,
                               const std::filesystem::path& dir, int epoch) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::size_t n = std::min<std::size_t>(8, std::min(ds.test_a.size(), ds.test_b.size()));
    if (n == 0) return;

    auto build = [&](std::span<const ImageTensor> src, std::span<const ImageTensor> ref,
                     qgen::Direction d, const char* tag) {
        std::vector<std::vector<ImageTensor>> rows(5);
        for (std::size_t i = 0; i < n; ++i) {
            const ImageTensor gen = qgen::translate(src[i], st.shared, d, cfg.decode);
            const ImageTensor post = postprocess::post_process(gen);
            ImageTensor diff;
            for (int j = 0; j < kImagePixels; ++j) diff.pixels[j] = std::abs(post.pixels[j] - ref[i].pixels[j]);
            rows[0].push_back(src[i]);
            rows[1].push_back(gen);
            rows[2].push_back(post);
            rows[3].push_back(ref[i]);
            rows[4].push_back(diff);
        }
        char name[64];
        std::snprintf(name, sizeof(name), "epoch_%03d_%s.png", epoch, tag);
        metrics::write_image_grid(dir / name, rows);
    };
    build(ds.test_a, ds.test_a_ref, qgen::Direction::Forward, "G");
    build(ds.test_b, ds.test_b_ref, qgen::Direction::Inverse, "F");
}

} // namespace detail

using EpochCallback = std::function<void(const TrainState&, int epoch)>;

/// Runs the full alternating loop: every batch updates both critics; every
/// n_c-th batch updates both generator directions and the ACNNs. An epoch is
/// one pass over the smaller domain (shuffled per epoch from the run seed);
/// the trailing partial batch is dropped. Deterministic given the seed.
/// On a NaN abort the last epoch checkpoint on disk is left intact.
inline TrainState fit(const TrainConfig& cfg, const data::SubDataset& ds,
                      const std::filesystem::path& out_dir, TrainState state,
                      const EpochCallback& on_epoch = {}) {
    namespace fs = std::filesystem;
    cfg.validate();

    std::size_t n_train = std::min(ds.train_a.size(), ds.train_b.size());
    if (cfg.limit_train > 0) n_train = std::min(n_train, static_cast<std::size_t>(cfg.limit_train));
    const std::size_t batches = n_train / static_cast<std::size_t>(cfg.batch_size);
    if (batches == 0) {
        throw std::invalid_argument("trainer: fewer training images than one batch");
    }
    fs::create_directories(out_dir);

    for (int epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> perm_a(n_train), perm_b(n_train);
        std::iota(perm_a.begin(), perm_a.end(), 0);
        std::iota(perm_b.begin(), perm_b.end(), 0);
        state.rng.shuffle(perm_a);
        state.rng.shuffle(perm_b);

        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<ImageTensor> batch_x, batch_y;
            for (int i = 0; i < cfg.batch_size; ++i) {
                batch_x.push_back(ds.train_a[perm_a[b * cfg.batch_size + i]]);
                batch_y.push_back(ds.train_b[perm_b[b * cfg.batch_size + i]]);
            }
            try {
                train_step_critics(state, cfg, batch_x, batch_y);
                if (state.batch_counter % static_cast<std::uint64_t>(cfg.n_critic) == 0) {
                    train_step_generators(state, cfg, batch_x, batch_y);
                }
            } catch (const NumericalError& e) {
                std::string msg = std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(state.batch_counter) + ")";
                if (state.epochs_done > 0) {
                    char name[32];
                    std::snprintf(name, sizeof(name), "epoch_%03d", state.epochs_done);
                    msg += "; last good checkpoint: " + (out_dir / "checkpoints" / name).string();
                }
                throw NumericalError(msg);
            }
        }
        state.epochs_done = epoch;

        detail::write_history_csv(state.history, out_dir);
        if (cfg.checkpoint_interval > 0 && epoch % cfg.checkpoint_interval == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d", epoch);
            save_checkpoint(state, out_dir / "checkpoints" / name);
        }
        if (cfg.sample_interval > 0 && epoch % cfg.sample_interval == 0) {
            detail::write_sample_grids(state, cfg, ds, out_dir / "samples", epoch);
        }
        if (on_epoch) on_epoch(state, epoch);
    }
    return state;
}

inline TrainState fit(const TrainConfig& cfg, const data::SubDataset& ds,
                      const std::filesystem::path& out_dir, const EpochCallback& on_epoch = {}) {
    return fit(cfg, ds, out_dir, TrainState::init(cfg), on_epoch);
}

} // namespace ihqgan::trainer
