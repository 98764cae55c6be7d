#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "nets.hpp"
#include "postprocess.hpp"
#include "qgen.hpp"
#include "rng.hpp"
#include "trainer.hpp"

namespace ihqgan::cli {

namespace fs = std::filesystem;

// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
// failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

namespace detail {

inline void write_run_manifest(const fs::path& dir, const config::RunConfig& cfg,
                               const std::string& command) {
    fs::create_directories(dir);
    std::ofstream out(dir / "run_manifest.txt", std::ios::trunc);
    if (!out) throw DataError("cli: cannot write run manifest in " + dir.string());
    out << cfg.manifest(command);
}

inline qgen::GeneratorParams load_generator(const fs::path& path) {
    const fs::path file = fs::is_directory(path) ? path / "generator.bin" : path;
    if (!fs::exists(file)) throw DataError("cli: checkpoint " + file.string() + " does not exist");
    return qgen::GeneratorParams::load(file);
}

inline std::uint32_t file_crc32(const fs::path& path) {
    const auto bytes = pngio::read_file(path);
    return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

struct DirectionEval {
    double fd = 0.0;
    double mean_ssim = 0.0;
    double mean_psnr = 0.0;
};

inline DirectionEval evaluate_direction(const qgen::GeneratorParams& params,
                                        std::span<const ImageTensor> sources,
                                        std::span<const ImageTensor> refs,
                                        std::span<const ImageTensor> real_target,
                                        qgen::Direction dir, qgen::DecodeRule decode, bool post,
                                        const metrics::PcaEmbedding& embedding) {
    std::vector<ImageTensor> generated;
    generated.reserve(sources.size());
    for (const ImageTensor& src : sources) {
        ImageTensor g = qgen::translate(src, params, dir, decode);
        if (post) g = postprocess::post_process(g);
        generated.push_back(g);
    }
    DirectionEval ev;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        ev.mean_ssim += metrics::ssim_metric(generated[i], refs[i]);
        ev.mean_psnr += metrics::psnr(generated[i], refs[i]);
    }
    ev.mean_ssim /= static_cast<double>(generated.size());
    ev.mean_psnr /= static_cast<double>(generated.size());
    ev.fd = metrics::frechet_distance(generated, real_target, embedding);
    return ev;
}

} // namespace detail

/// build-data: construct one unpaired sub-dataset from MNIST IDX files.
inline int cmd_build_data(const config::RunConfig& cfg) {
    const data::Mnist mnist = data::load_mnist_dir(cfg.mnist_dir);
    const data::SubDataset ds =
        data::build_subdataset(mnist, cfg.task_id(), cfg.label, cfg.seed, cfg.data_params());
    fs::create_directories(cfg.out_dir);
    data::write_dataset(ds, cfg.out_dir);
    detail::write_run_manifest(cfg.out_dir, cfg, "build-data");
    std::cout << "built " << data::task_name(ds.task) << " label " << ds.label << ": "
              << ds.train_a.size() << "+" << ds.test_a.size() << " images per domain under "
              << cfg.out_dir << "\n";
    return kExitOk;
}

/// train: run the alternating adversarial loop on a built dataset.
inline int cmd_train(const config::RunConfig& cfg) {
    const data::SubDataset ds = data::load_dataset(cfg.dataset_dir);
    const trainer::TrainConfig tcfg = cfg.train_config();
    tcfg.validate();
    detail::write_run_manifest(cfg.out_dir, cfg, "train");

    trainer::TrainState state =
        cfg.checkpoint.empty() ? trainer::TrainState::init(tcfg)
                               : trainer::load_checkpoint(cfg.checkpoint, tcfg);
    state = trainer::fit(tcfg, ds, cfg.out_dir, std::move(state), [](const trainer::TrainState& st, int epoch) {
        double mean_total = 0.0;
        int n = 0;
        for (const trainer::GenRecord& r : st.history.gen) {
            if (r.epoch == epoch) {
                mean_total += r.total_g + r.total_f;
                ++n;
            }
        }
        std::cout << "epoch " << epoch << ": " << st.history.critic.size() << " critic steps, "
                  << st.history.gen.size() << " generator steps";
        if (n > 0) std::cout << ", mean generator total " << mean_total / (2 * n);
        std::cout << "\n";
    });
    std::cout << "trained " << state.epochs_done << " epochs; checkpoints under " << cfg.out_dir
              << "/checkpoints\n";
    return kExitOk;
}

/// translate: map a directory of 32x32 grayscale PNGs through G or F.
inline int cmd_translate(const config::RunConfig& cfg, const std::string& direction,
                         const std::string& input_dir) {
    if (direction != "G" && direction != "F") {
        throw std::invalid_argument("cli: --direction must be G or F");
    }
    const qgen::Direction dir =
        direction == "G" ? qgen::Direction::Forward : qgen::Direction::Inverse;
    const qgen::GeneratorParams params = detail::load_generator(cfg.checkpoint);

    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(input_dir)) {
        if (entry.path().extension() == ".png") inputs.push_back(entry.path());
    }
    if (inputs.empty()) throw DataError("cli: no .png inputs in " + input_dir);
    std::sort(inputs.begin(), inputs.end());

    fs::create_directories(cfg.out_dir);
    const fs::path cp_file =
        fs::is_directory(cfg.checkpoint) ? fs::path(cfg.checkpoint) / "generator.bin" : fs::path(cfg.checkpoint);
    std::ostringstream manifest;
    char crc_buf[16];
    std::snprintf(crc_buf, sizeof(crc_buf), "%08x", detail::file_crc32(cp_file));
    manifest << "command=translate\ndirection=" << direction << "\npost=" << (cfg.post ? "true" : "false")
             << "\ncheckpoint=" << cp_file.string() << "\ncheckpoint_crc32=" << crc_buf << "\n";

    for (const fs::path& in_path : inputs) {
        const auto png = pngio::decode_gray8(pngio::read_file(in_path));
        if (png.width != kImageSide || png.height != kImageSide) {
            throw DataError("cli: " + in_path.string() + " is not 32x32");
        }
        ImageTensor img;
        for (int i = 0; i < kImagePixels; ++i) img.pixels[i] = png.pixels[i] / 255.0;
        ImageTensor out = qgen::translate(img, params, dir, cfg.decode_rule());
        if (cfg.post) out = postprocess::post_process(out);

        std::vector<std::uint8_t> bytes(kImagePixels);
        for (int i = 0; i < kImagePixels; ++i) {
            bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(out.pixels[i], 0.0, 1.0) * 255.0));
        }
        const fs::path out_path = fs::path(cfg.out_dir) / in_path.filename();
        pngio::write_file(out_path, pngio::encode_gray8(bytes, kImageSide, kImageSide));
        std::snprintf(crc_buf, sizeof(crc_buf), "%08x",
                      static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size()))));
        manifest << "output " << in_path.filename().string() << " " << crc_buf << "\n";
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "translate_manifest.txt", std::ios::trunc);
        out << manifest.str();
    }
    detail::write_run_manifest(cfg.out_dir, cfg, "translate");
    std::cout << "translated " << inputs.size() << " images (" << direction << ") into " << cfg.out_dir
              << "\n";
    return kExitOk;
}

/// evaluate: FD/SSIM/PSNR for both directions of a sub-dataset, CSV out.
inline int cmd_evaluate(const config::RunConfig& cfg, const std::string& out_csv,
                        const std::string& grids_dir) {
    const qgen::GeneratorParams params = detail::load_generator(cfg.checkpoint);
    const data::SubDataset ds = data::load_dataset(cfg.dataset_dir);

    // embedding fitted once on the combined real test set of the sub-dataset
    std::vector<ImageTensor> combined(ds.test_a.begin(), ds.test_a.end());
    combined.insert(combined.end(), ds.test_b.begin(), ds.test_b.end());
    const metrics::PcaEmbedding embedding = metrics::PcaEmbedding::fit(combined);

    const auto g_eval = detail::evaluate_direction(params, ds.test_a, ds.test_a_ref, ds.test_b,
                                                   qgen::Direction::Forward, cfg.decode_rule(), cfg.post,
                                                   embedding);
    const auto f_eval = detail::evaluate_direction(params, ds.test_b, ds.test_b_ref, ds.test_a,
                                                   qgen::Direction::Inverse, cfg.decode_rule(), cfg.post,
                                                   embedding);
    const std::vector<metrics::ReportRow> rows{
        {data::task_name(ds.task), ds.label, "A_to_B", g_eval.fd, g_eval.mean_ssim, g_eval.mean_psnr},
        {data::task_name(ds.task), ds.label, "B_to_A", f_eval.fd, f_eval.mean_ssim, f_eval.mean_psnr},
    };
    const fs::path csv_path(out_csv);
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw DataError("cli: cannot write " + out_csv);
    out << metrics::emit_report(rows);
    detail::write_run_manifest(csv_path.has_parent_path() ? csv_path.parent_path() : fs::path("."), cfg,
                               "evaluate");

    if (!grids_dir.empty()) {
        fs::create_directories(grids_dir);
        const std::size_t n = std::min<std::size_t>(8, ds.test_a.size());
        auto build = [&](std::span<const ImageTensor> src, std::span<const ImageTensor> ref,
                         qgen::Direction d, const char* tag) {
            std::vector<std::vector<ImageTensor>> grid(5);
            for (std::size_t i = 0; i < n; ++i) {
                const ImageTensor gen = qgen::translate(src[i], params, d, cfg.decode_rule());
                const ImageTensor post = postprocess::post_process(gen);
                ImageTensor diff;
                for (int j = 0; j < kImagePixels; ++j) {
                    diff.pixels[j] = std::abs(post.pixels[j] - ref[i].pixels[j]);
                }
                grid[0].push_back(src[i]);
                grid[1].push_back(gen);
                grid[2].push_back(post);
                grid[3].push_back(ref[i]);
                grid[4].push_back(diff);
            }
            metrics::write_image_grid(fs::path(grids_dir) / (std::string("grid_") + tag + ".png"), grid);
        };
        build(ds.test_a, ds.test_a_ref, qgen::Direction::Forward, "G");
        build(ds.test_b, ds.test_b_ref, qgen::Direction::Inverse, "F");
    }
    std::cout << metrics::emit_report(rows);
    return kExitOk;
}

/// check-inverse: verify u_l(u_k(psi)) = psi over random draws; the
/// --corrupt-sign hook negates without the role swap and must fail.
inline int cmd_check_inverse(const config::RunConfig& cfg, int trials, bool corrupt_sign,
                             const std::string& report_path) {
    Rng rng(cfg.seed);
    const qgen::InverseMode mode = corrupt_sign ? qgen::InverseMode::NegateOnly : qgen::InverseMode::Exact;
    std::vector<double> worst_per_circuit(qgen::kPatchCount, 0.0);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int k = t % qgen::kPatchCount;
        const qgen::GeneratorParams params = qgen::GeneratorParams::random(rng);
        qsim::StateVector psi;
        psi.n_qubits = qgen::kQubits;
        psi.amplitudes.resize(std::size_t{1} << qgen::kQubits);
        for (auto& a : psi.amplitudes) a = {rng.normal(), rng.normal()};
        const double norm = psi.norm();
        for (auto& a : psi.amplitudes) a /= norm;

        const qsim::StateVector round =
            qgen::evolve_patch(params, k, qgen::Direction::Inverse,
                               qgen::evolve_patch(params, k, qgen::Direction::Forward, psi), mode);
        const double dev = qsim::distance(round, psi);
        worst_per_circuit[k] = std::max(worst_per_circuit[k], dev);
        worst = std::max(worst, dev);
    }

    std::ostringstream report;
    report << "inversion check: seed=" << cfg.seed << " trials=" << trials
           << (corrupt_sign ? " (corrupted sign mode)" : "") << "\n";
    for (int k = 0; k < qgen::kPatchCount; ++k) {
        char line[64];
        std::snprintf(line, sizeof(line), "circuit %02d worst deviation %.3e\n", k, worst_per_circuit[k]);
        report << line;
    }
    const bool pass = worst < 1e-10;
    char tail[80];
    std::snprintf(tail, sizeof(tail), "max deviation %.3e -> %s (threshold 1e-10)\n", worst,
                  pass ? "PASS" : "FAIL");
    report << tail;
    std::cout << report.str();
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::trunc);
        out << report.str();
    }
    return pass ? kExitOk : kExitNumerical;
}

namespace detail {

inline std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                             std::vector<double> x, double h) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

inline double max_rel_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

// central differences are invalid within a step of a LeakyReLU kink; audits
// redraw such instances (see the factor-of-input-magnitude margin in nets)
inline bool away_from_kinks(const nets::DenseNet& net, std::span<const double> x) {
    nets::ForwardCache cache;
    nets::forward(net, x, &cache);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (net.layers[li].act != nets::Activation::LeakyRelu) continue;
        double scale = 1.0;
        for (double a : cache.inputs[li]) scale = std::max(scale, std::abs(a));
        for (double z : cache.pre[li]) {
            if (std::abs(z) < 1e-4 * scale) return false;
        }
    }
    return true;
}

struct AuditResult {
    std::string name;
    double worst = 0.0;
    double threshold = 0.0;
    bool pass() const { return worst < threshold; }
};

} // namespace detail

/// grad-check: finite-difference audits of every analytic gradient path.
inline int cmd_grad_check(const config::RunConfig& cfg) {
    Rng rng(cfg.seed);
    std::vector<detail::AuditResult> audits;

    {   // quantum circuit gradients on the production 12-block template
        detail::AuditResult a{"quantum-circuit-grads", 0.0, 1e-4};
        const auto gates = qgen::circuit_template(qgen::Direction::Forward);
        for (int t = 0; t < 20; ++t) {
            std::vector<double> angles(qgen::kAnglesPerCircuit);
            for (double& v : angles) v = rng.uniform(-3.14, 3.14);
            qsim::StateVector psi;
            psi.n_qubits = qgen::kQubits;
            psi.amplitudes.resize(32);
            for (auto& amp : psi.amplitudes) amp = {rng.normal(), rng.normal()};
            const double norm = psi.norm();
            for (auto& amp : psi.amplitudes) amp /= norm;
            std::vector<double> upstream(32);
            for (double& u : upstream) u = rng.uniform(-1, 1);

            const auto analytic = qsim::circuit_grad(gates, angles, psi, upstream);
            const auto fd = detail::finite_difference(
                [&](std::span<const double> v) {
                    const auto probs = qsim::measure_probs(qsim::run_circuit(gates, v, psi));
                    double acc = 0.0;
                    for (std::size_t i = 0; i < probs.size(); ++i) acc += upstream[i] * probs[i];
                    return acc;
                },
                angles, 1e-5);
            a.worst = std::max(a.worst, detail::max_rel_error(analytic, fd));
        }
        audits.push_back(a);
    }

    auto fresh_critic = [&]() {
        const int widths[] = {6, 5, 4, 1};
        const nets::Activation acts[] = {nets::Activation::LeakyRelu, nets::Activation::LeakyRelu,
                                         nets::Activation::None};
        const double slopes[] = {0.2, 0.2, 0.0};
        return nets::make_dense(widths, acts, slopes, rng);
    };
    auto fresh_input = [&](std::size_t n) {
        std::vector<double> x(n);
        for (double& v : x) v = rng.uniform(-1, 1);
        return x;
    };

    {   // critic parameter gradients
        detail::AuditResult a{"critic-grads", 0.0, 1e-4};
        for (int t = 0; t < 20; ++t) {
            nets::DenseNet net = fresh_critic();
            std::vector<double> x = fresh_input(6);
            while (!detail::away_from_kinks(net, x)) {
                net = fresh_critic();
                x = fresh_input(6);
            }
            const auto analytic = nets::backprop(net, x, std::vector<double>{1.0}).param_grads;
            nets::DenseNet probe = net;
            const auto fd = detail::finite_difference(
                [&](std::span<const double> flat) {
                    probe.unflatten_params(flat);
                    return nets::critic_forward(probe, x);
                },
                net.flatten_params(), 1e-5);
            a.worst = std::max(a.worst, detail::max_rel_error(analytic, fd));
        }
        audits.push_back(a);
    }

    {   // gradient-penalty term parameter gradients
        detail::AuditResult a{"penalty-term-grads", 0.0, 1e-4};
        for (int t = 0; t < 20; ++t) {
            nets::DenseNet net = fresh_critic();
            std::vector<double> x = fresh_input(6);
            while (!detail::away_from_kinks(net, x)) {
                net = fresh_critic();
                x = fresh_input(6);
            }
            const auto analytic = nets::gradient_penalty(net, x).param_grads;
            nets::DenseNet probe = net;
            const auto fd = detail::finite_difference(
                [&](std::span<const double> flat) {
                    probe.unflatten_params(flat);
                    return nets::gradient_penalty(probe, x).value;
                },
                net.flatten_params(), 1e-5);
            a.worst = std::max(a.worst, detail::max_rel_error(analytic, fd));
        }
        audits.push_back(a);
    }

    {   // ACNN parameter gradients through the [0,1] adapter
        detail::AuditResult a{"acnn-grads", 0.0, 1e-4};
        const int widths[] = {8, 6, 4, 3, 2, 6, 8};
        const nets::Activation acts[] = {nets::Activation::LeakyRelu, nets::Activation::LeakyRelu,
                                         nets::Activation::LeakyRelu, nets::Activation::LeakyRelu,
                                         nets::Activation::LeakyRelu, nets::Activation::Tanh};
        const double slopes[] = {0.05, 0.05, 0.05, 0.05, 0.05, 0.0};
        for (int t = 0; t < 20; ++t) {
            nets::DenseNet net = nets::make_dense(widths, acts, slopes, rng);
            std::vector<double> x(8);
            for (double& v : x) v = rng.uniform(0, 1);
            while (!detail::away_from_kinks(net, x)) {
                net = nets::make_dense(widths, acts, slopes, rng);
                for (double& v : x) v = rng.uniform(0, 1);
            }
            std::vector<double> upstream(8);
            for (double& u : upstream) u = rng.uniform(-1, 1);
            const auto analytic = nets::acnn_backward(net, x, upstream).param_grads;
            nets::DenseNet probe = net;
            const auto fd = detail::finite_difference(
                [&](std::span<const double> flat) {
                    probe.unflatten_params(flat);
                    const auto out = nets::acnn_forward(probe, x);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < out.size(); ++i) acc += upstream[i] * out[i];
                    return acc;
                },
                net.flatten_params(), 1e-5);
            a.worst = std::max(a.worst, detail::max_rel_error(analytic, fd));
        }
        audits.push_back(a);
    }

    {   // end-to-end generator path through encode, circuit, and max-decode
        detail::AuditResult a{"generator-end-to-end-grads", 0.0, 1e-3};
        for (int t = 0; t < 20; ++t) {
            qgen::GeneratorParams params = qgen::GeneratorParams::random(rng);
            ImageTensor img;
            for (double& p : img.pixels) p = rng.uniform(0.1, 0.9);
            const int row = static_cast<int>(rng.below(qgen::kPatchCount));

            // the max-decode subgradient needs a stable argmax under the FD
            // step; redraw if the target patch's top probabilities are close
            {
                const auto patches = qgen::split_patches(img);
                auto probe_probs = [&]() {
                    return qsim::measure_probs(qgen::evolve_patch(params, row, qgen::Direction::Forward,
                                                                  qsim::amplitude_encode(patches[row])));
                };
                std::vector<double> probs = probe_probs();
                std::vector<double> sorted = probs;
                std::sort(sorted.rbegin(), sorted.rend());
                int guard = 0;
                while (sorted[0] - sorted[1] < 1e-3 && guard++ < 50) {
                    params = qgen::GeneratorParams::random(rng);
                    probs = probe_probs();
                    sorted = probs;
                    std::sort(sorted.rbegin(), sorted.rend());
                }
            }

            ImageTensor upstream{};
            std::vector<double> weights(qgen::kPatchSize);
            for (int c = 0; c < qgen::kPatchSize; ++c) {
                weights[c] = rng.uniform(-1, 1);
                upstream.at(row, c) = weights[c];
            }
            const qgen::GeneratorGrad analytic =
                qgen::generator_grad(img, params, qgen::Direction::Forward, upstream);

            std::vector<double> got(qgen::kAnglesPerCircuit), fd(qgen::kAnglesPerCircuit);
            const double h = 1e-5;
            for (std::size_t i = 0; i < qgen::kAnglesPerCircuit; ++i) {
                const std::size_t flat = row * qgen::kAnglesPerCircuit + i;
                auto eval = [&](double delta) {
                    qgen::GeneratorParams p2 = params;
                    p2.angles[flat] += delta;
                    const ImageTensor out = qgen::translate(img, p2, qgen::Direction::Forward);
                    double acc = 0.0;
                    for (int c = 0; c < qgen::kPatchSize; ++c) acc += weights[c] * out.at(row, c);
                    return acc;
                };
                fd[i] = (eval(h) - eval(-h)) / (2 * h);
                got[i] = analytic.angle_grads[flat];
            }
            a.worst = std::max(a.worst, detail::max_rel_error(got, fd, 1e-5));
        }
        audits.push_back(a);
    }

    bool all_pass = true;
    for (const auto& a : audits) {
        char line[128];
        std::snprintf(line, sizeof(line), "%s %s: max relative error %.3e (threshold %.0e)\n",
                      a.pass() ? "PASS" : "FAIL", a.name.c_str(), a.worst, a.threshold);
        std::cout << line;
        all_pass = all_pass && a.pass();
    }
    return all_pass ? kExitOk : kExitNumerical;
}

/// study: the hyperparameter grid harness; one training run per
/// (eps, eta, rho) combination with per-epoch FD/SSIM curves for both
/// directions.
inline int cmd_study(const config::RunConfig& base_cfg, const std::string& out_csv,
                     const std::vector<std::string>& combo_specs) {
    const data::SubDataset ds = data::load_dataset(base_cfg.dataset_dir);

    std::vector<std::array<double, 3>> combos;
    for (const std::string& spec : combo_specs) {
        std::array<double, 3> combo{};
        std::istringstream in(spec);
        std::string part;
        int idx = 0;
        while (std::getline(in, part, ':') && idx < 3) combo[idx++] = std::stod(part);
        if (idx != 3) {
            throw std::invalid_argument("cli: --combo expects eps:eta:rho, got '" + spec + "'");
        }
        combos.push_back(combo);
    }

    std::vector<ImageTensor> combined(ds.test_a.begin(), ds.test_a.end());
    combined.insert(combined.end(), ds.test_b.begin(), ds.test_b.end());
    const metrics::PcaEmbedding embedding = metrics::PcaEmbedding::fit(combined);

    std::ostringstream csv;
    csv << "task,label,eps,eta,rho,epoch,direction,FD,SSIM\n";
    char buf[256];
    for (const auto& combo : combos) {
        config::RunConfig cfg = base_cfg;
        cfg.eps = combo[0];
        cfg.eta = combo[1];
        cfg.rho = combo[2];
        trainer::TrainConfig tcfg = cfg.train_config();
        tcfg.sample_interval = 0;
        tcfg.checkpoint_interval = 0;

        const fs::path run_dir =
            fs::path(base_cfg.out_dir) / ("study_" + std::to_string(combo[0]) + "_" +
                                          std::to_string(combo[1]) + "_" + std::to_string(combo[2]));
        trainer::fit(tcfg, ds, run_dir, [&](const trainer::TrainState& st, int epoch) {
            const auto g = detail::evaluate_direction(st.shared, ds.test_a, ds.test_a_ref, ds.test_b,
                                                      qgen::Direction::Forward, cfg.decode_rule(),
                                                      cfg.post, embedding);
            const auto f = detail::evaluate_direction(st.shared, ds.test_b, ds.test_b_ref, ds.test_a,
                                                      qgen::Direction::Inverse, cfg.decode_rule(),
                                                      cfg.post, embedding);
            std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%d,A_to_B,%.9g,%.9g\n",
                          data::task_name(ds.task), ds.label, combo[0], combo[1], combo[2], epoch, g.fd,
                          g.mean_ssim);
            csv << buf;
            std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%d,B_to_A,%.9g,%.9g\n",
                          data::task_name(ds.task), ds.label, combo[0], combo[1], combo[2], epoch, f.fd,
                          f.mean_ssim);
            csv << buf;
        });
    }

    const fs::path csv_path(out_csv);
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw DataError("cli: cannot write " + out_csv);
    out << csv.str();
    detail::write_run_manifest(base_cfg.out_dir, base_cfg, "study");
    std::cout << "study: " << combos.size() << " combinations x " << base_cfg.epochs
              << " epochs written to " << out_csv << "\n";
    return kExitOk;
}

inline const std::vector<std::string> kDefaultStudyCombos = {
    "1:10:150", "10:10:150", "10:20:300", "10:30:450", "20:30:450",
};

namespace detail {

// Binds the documented flag surface to a RunConfig with file-then-flag
// precedence: defaults < config file < IHQGAN_SEED fallback < explicit flag.
struct ConfigBinder {
    config::RunConfig defaults;   // per-command default overrides
    config::RunConfig staged;
    std::string config_path;
    std::vector<std::pair<CLI::Option*, std::function<void(config::RunConfig&)>>> appliers;
    CLI::Option* seed_opt = nullptr;

    template <typename T>
    CLI::Option* bind(CLI::App* cmd, const std::string& flag, T config::RunConfig::*field,
                      const std::string& desc) {
        CLI::Option* opt = cmd->add_option(flag, staged.*field, desc);
        appliers.emplace_back(opt, [this, field](config::RunConfig& c) { c.*field = staged.*field; });
        return opt;
    }

    CLI::Option* bind_flag(CLI::App* cmd, const std::string& flag, bool config::RunConfig::*field,
                           const std::string& desc) {
        CLI::Option* opt = cmd->add_flag(flag, staged.*field, desc);
        appliers.emplace_back(opt, [this, field](config::RunConfig& c) { c.*field = staged.*field; });
        return opt;
    }

    void attach_common(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key=value config file");
        seed_opt = bind(cmd, "--seed", &config::RunConfig::seed, "RNG seed (IHQGAN_SEED as fallback)");
    }

    void attach_hyper(CLI::App* cmd) {
        bind(cmd, "--epochs", &config::RunConfig::epochs, "training epochs");
        bind(cmd, "--batch-size", &config::RunConfig::batch_size, "batch size m");
        bind(cmd, "--nc", &config::RunConfig::n_c, "critic iterations per generator iteration");
        bind(cmd, "--lr-gen", &config::RunConfig::lr_gen, "generator learning rate");
        bind(cmd, "--lr-critic", &config::RunConfig::lr_critic, "critic/ACNN learning rate");
        bind(cmd, "--eps", &config::RunConfig::eps, "adversarial weight");
        bind(cmd, "--eta", &config::RunConfig::eta, "cycle weight");
        bind(cmd, "--rho", &config::RunConfig::rho, "IQA weight");
        bind(cmd, "--lambda", &config::RunConfig::lambda, "gradient penalty coefficient");
        bind(cmd, "--decode", &config::RunConfig::decode, "probability decode rule: max|sum");
        bind(cmd, "--adv-sign", &config::RunConfig::adv_sign, "generator adversarial sign: standard|literal");
        bind(cmd, "--limit-train", &config::RunConfig::limit_train, "cap train images per domain (0 = all)");
        bind_flag(cmd, "--train-acnns,!--freeze-acnns", &config::RunConfig::train_acnns,
                  "train the assisted networks (freeze to replicate the literal published loop)");
        bind(cmd, "--sample-interval", &config::RunConfig::sample_interval,
             "epochs between sample grids (0 = never)");
    }

    config::RunConfig resolve() const {
        config::RunConfig cfg = defaults;
        config::load_into(cfg, config_path, seed_opt != nullptr && seed_opt->count() > 0);
        for (const auto& [opt, apply] : appliers) {
            if (opt->count() > 0) apply(cfg);
        }
        return cfg;
    }
};

} // namespace detail

/// Full argv-level dispatcher; returns the process exit code.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"invertible hybrid quantum-classical GAN workbench"};
    app.require_subcommand(1);

    std::function<int()> action;

    // ---- build-data ----
    auto binder_bd = std::make_shared<detail::ConfigBinder>();
    {
        CLI::App* cmd = app.add_subcommand("build-data", "construct an unpaired sub-dataset from MNIST");
        binder_bd->attach_common(cmd);
        binder_bd->bind(cmd, "--task", &config::RunConfig::task,
                        "edge_detection | font_style_transfer | image_denoising");
        binder_bd->bind(cmd, "--label", &config::RunConfig::label, "digit label");
        binder_bd->bind(cmd, "--mnist", &config::RunConfig::mnist_dir, "directory with MNIST IDX files")
            ->required();
        binder_bd->bind(cmd, "--out", &config::RunConfig::out_dir, "output dataset directory")->required();
        binder_bd->bind(cmd, "--noise-sigma", &config::RunConfig::noise_sigma, "denoising task noise std");
        binder_bd->bind(cmd, "--canny-sigma", &config::RunConfig::canny_sigma, "edge task smoothing");
        binder_bd->bind(cmd, "--canny-low-pct", &config::RunConfig::canny_low_pct, "weak threshold pctile");
        binder_bd->bind(cmd, "--canny-high-pct", &config::RunConfig::canny_high_pct,
                        "strong threshold pctile");
        cmd->callback([&action, binder_bd] {
            action = [binder_bd] { return cmd_build_data(binder_bd->resolve()); };
        });
    }

    // ---- train ----
    auto binder_tr = std::make_shared<detail::ConfigBinder>();
    {
        CLI::App* cmd = app.add_subcommand("train", "run the alternating adversarial training loop");
        binder_tr->attach_common(cmd);
        binder_tr->attach_hyper(cmd);
        binder_tr->bind(cmd, "--data", &config::RunConfig::dataset_dir, "built dataset directory")
            ->required();
        binder_tr->bind(cmd, "--out", &config::RunConfig::out_dir, "run output directory")->required();
        binder_tr->bind(cmd, "--resume", &config::RunConfig::checkpoint,
                        "checkpoint directory to resume from");
        cmd->callback([&action, binder_tr] {
            action = [binder_tr] { return cmd_train(binder_tr->resolve()); };
        });
    }

    // ---- translate ----
    auto binder_tl = std::make_shared<detail::ConfigBinder>();
    auto direction = std::make_shared<std::string>("G");
    auto input_dir = std::make_shared<std::string>();
    {
        CLI::App* cmd = app.add_subcommand("translate", "map a directory of 32x32 PNGs through G or F");
        binder_tl->attach_common(cmd);
        binder_tl->bind(cmd, "--checkpoint", &config::RunConfig::checkpoint,
                        "generator checkpoint (file or checkpoint directory)")
            ->required();
        cmd->add_option("--direction", *direction, "G (A->B) or F (B->A)")->required();
        cmd->add_option("--input", *input_dir, "directory of input PNGs")->required();
        binder_tl->bind(cmd, "--out", &config::RunConfig::out_dir, "output directory")->required();
        binder_tl->bind(cmd, "--decode", &config::RunConfig::decode, "probability decode rule: max|sum");
        // raw dumps by default; reports default to post-processing instead
        binder_tl->defaults.post = false;
        binder_tl->staged.post = false;
        binder_tl->bind_flag(cmd, "--post,!--no-post", &config::RunConfig::post,
                             "apply row-zeroing post-processing");
        cmd->callback([&action, binder_tl, direction, input_dir] {
            action = [binder_tl, direction, input_dir] {
                return cmd_translate(binder_tl->resolve(), *direction, *input_dir);
            };
        });
    }

    // ---- evaluate ----
    auto binder_ev = std::make_shared<detail::ConfigBinder>();
    auto out_csv = std::make_shared<std::string>();
    auto grids_dir = std::make_shared<std::string>();
    {
        CLI::App* cmd = app.add_subcommand("evaluate", "FD/SSIM/PSNR report for both directions");
        binder_ev->attach_common(cmd);
        binder_ev->bind(cmd, "--checkpoint", &config::RunConfig::checkpoint,
                        "generator checkpoint (file or checkpoint directory)")
            ->required();
        binder_ev->bind(cmd, "--data", &config::RunConfig::dataset_dir, "built dataset directory")
            ->required();
        cmd->add_option("--out", *out_csv, "output CSV path")->required();
        cmd->add_option("--grids", *grids_dir, "optional directory for comparison grids");
        binder_ev->bind(cmd, "--decode", &config::RunConfig::decode, "probability decode rule: max|sum");
        binder_ev->bind_flag(cmd, "--post,!--no-post", &config::RunConfig::post,
                             "apply post-processing to generated images (default on)");
        cmd->callback([&action, binder_ev, out_csv, grids_dir] {
            action = [binder_ev, out_csv, grids_dir] {
                return cmd_evaluate(binder_ev->resolve(), *out_csv, *grids_dir);
            };
        });
    }

    // ---- check-inverse ----
    auto binder_ci = std::make_shared<detail::ConfigBinder>();
    auto trials = std::make_shared<int>(1000);
    auto corrupt = std::make_shared<bool>(false);
    auto report_path = std::make_shared<std::string>();
    {
        CLI::App* cmd = app.add_subcommand("check-inverse", "verify mutual circuit inversion");
        binder_ci->attach_common(cmd);
        cmd->add_option("--trials", *trials, "number of random draws");
        cmd->add_flag("--corrupt-sign", *corrupt, "negative control: negate without the role swap");
        cmd->add_option("--report", *report_path, "optional report file");
        cmd->callback([&action, binder_ci, trials, corrupt, report_path] {
            action = [binder_ci, trials, corrupt, report_path] {
                return cmd_check_inverse(binder_ci->resolve(), *trials, *corrupt, *report_path);
            };
        });
    }

    // ---- grad-check ----
    auto binder_gc = std::make_shared<detail::ConfigBinder>();
    {
        CLI::App* cmd = app.add_subcommand("grad-check", "finite-difference audits of all gradient paths");
        binder_gc->attach_common(cmd);
        cmd->callback([&action, binder_gc] {
            action = [binder_gc] { return cmd_grad_check(binder_gc->resolve()); };
        });
    }

    // ---- study ----
    auto binder_st = std::make_shared<detail::ConfigBinder>();
    auto study_csv = std::make_shared<std::string>();
    auto combos = std::make_shared<std::vector<std::string>>();
    {
        CLI::App* cmd = app.add_subcommand("study", "hyperparameter grid with per-epoch FD/SSIM curves");
        binder_st->attach_common(cmd);
        binder_st->attach_hyper(cmd);
        binder_st->bind(cmd, "--data", &config::RunConfig::dataset_dir, "built dataset directory")
            ->required();
        binder_st->bind(cmd, "--out-dir", &config::RunConfig::out_dir, "directory for per-run artifacts")
            ->required();
        cmd->add_option("--out", *study_csv, "curves CSV path")->required();
        cmd->add_option("--combo", *combos, "eps:eta:rho (repeatable; defaults to the published grid)");
        binder_st->bind_flag(cmd, "--post,!--no-post", &config::RunConfig::post,
                             "post-process generated images during evaluation");
        cmd->callback([&action, binder_st, study_csv, combos] {
            action = [binder_st, study_csv, combos] {
                return cmd_study(binder_st->resolve(), *study_csv,
                                 combos->empty() ? kDefaultStudyCombos : *combos);
            };
        });
    }

    std::vector<const char*> argv{"ihqgan"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        return action ? action() : kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

} // namespace ihqgan::cli
