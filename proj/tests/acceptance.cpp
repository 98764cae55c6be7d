// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "ihqgan/cli.hpp"
#include "ihqgan/config.hpp"
#include "ihqgan/data.hpp"
#include "ihqgan/losses.hpp"
#include "ihqgan/metrics.hpp"
#include "ihqgan/nets.hpp"
#include "ihqgan/postprocess.hpp"
#include "ihqgan/qgen.hpp"
#include "ihqgan/qsim.hpp"
#include "ihqgan/trainer.hpp"
#include "helpers.hpp"

using namespace ihqgan;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int number;
    std::string name;
    std::function<void()> run;   // throws on failure
};

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
    if (!cond) throw Failure(what);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- criterion 1: inversion invariant -------------------------------------
void criterion_inversion() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240001);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = trial % qgen::kPatchCount;
        const qgen::GeneratorParams params = qgen::GeneratorParams::random(rng);
        qsim::StateVector psi = test_helpers::random_state(rng, qgen::kQubits);
        const qsim::StateVector round =
            qgen::evolve_patch(params, k, qgen::Direction::Inverse,
                               qgen::evolve_patch(params, k, qgen::Direction::Forward, psi));
        worst = std::max(worst, qsim::distance(round, psi));
    }
    const double elapsed = seconds_since(t0);
    std::printf("    max deviation %.3e over 1000 draws, %.2f s\n", worst, elapsed);
    require(worst < 1e-10, "max deviation " + std::to_string(worst) + " >= 1e-10");
    require(elapsed < 10.0, "runtime exceeded 10 s");
}

// ---- criterion 2: unitarity ------------------------------------------------
void criterion_unitarity() {
    Rng rng(20240002);
    qsim::StateVector psi = test_helpers::random_state(rng, qgen::kQubits);
    std::vector<double> angles(12);
    for (double& a : angles) a = rng.uniform(-3.141592653589793, 3.141592653589793);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        if (rng.uniform() < 0.7) {
            const int w = static_cast<int>(rng.below(qgen::kQubits));
            const std::vector<qsim::GateSpec> g{
                qsim::GateSpec::rot(w, {rng.below(12), false}, {rng.below(12), false}, {rng.below(12), false})};
            psi = qsim::run_circuit(g, angles, std::move(psi));
        } else {
            const int c = static_cast<int>(rng.below(qgen::kQubits));
            const int t = (c + 1 + static_cast<int>(rng.below(qgen::kQubits - 1))) % qgen::kQubits;
            psi = qsim::apply_cnot(std::move(psi), c, t);
        }
        worst = std::max(worst, std::abs(psi.norm() - 1.0));
        if (worst >= 1e-12) break;
        if (i % 500 == 0) {
            for (double& a : angles) a = rng.uniform(-3.141592653589793, 3.141592653589793);
        }
    }
    std::printf("    worst norm drift %.3e over 10^4 gates\n", worst);
    require(worst < 1e-12, "norm drift " + std::to_string(worst) + " >= 1e-12");
}

// ---- criterion 3: gradient audits -------------------------------------------
void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    config::RunConfig cfg;
    cfg.seed = 20240003;
    const int rc = cli::cmd_grad_check(cfg);
    const double elapsed = seconds_since(t0);
    std::printf("    audits completed in %.2f s\n", elapsed);
    require(rc == 0, "one or more finite-difference audits failed");
    require(elapsed < 120.0, "runtime exceeded 2 min");
}

// ---- criterion 4: parameter counts ------------------------------------------
void criterion_param_counts() {
    trainer::TrainConfig cfg;
    trainer::TrainState st = trainer::TrainState::init(cfg);
    const std::size_t expected_critic = 1024 * 512 + 512 + 512 * 256 + 256 + 256 * 1 + 1;
    std::printf("    generator %zu angles, critics %zu parameters each\n",
                st.generator_parameter_count(), st.d_x.param_count());
    require(st.generator_parameter_count() == 5760, "shared generator parameter count != 5760");
    require(st.d_x.param_count() == expected_critic, "D_X parameter count mismatch");
    require(st.d_y.param_count() == expected_critic, "D_Y parameter count mismatch");
}

// ---- criterion 5: metric oracles --------------------------------------------
void criterion_metric_oracles() {
    Rng rng(20240005);
    const ImageTensor a = test_helpers::random_image(rng);
    require(std::abs(losses::ssim(a, a) - 1.0) < 1e-12, "SSIM(a,a) != 1");

    ImageTensor b;
    for (int i = 0; i < kImagePixels; ++i) b.pixels[i] = a.pixels[i] + 0.1;
    const double p = metrics::psnr(a, b);
    require(std::abs(p - 20.0) < 1e-9, "PSNR of the uniform 0.1 offset != 20 dB");

    std::vector<ImageTensor> set;
    for (int i = 0; i < 16; ++i) set.push_back(test_helpers::random_image(rng));
    const double fd = metrics::frechet_distance(set, set);
    require(fd < 1e-6, "Frechet distance of identical sets >= 1e-6");

    const ImageTensor r1[] = {b};
    const ImageTensor r2[] = {a};
    const double l1 = losses::cycle_l1(r1, r2);
    require(std::abs(l1 - 102.4) < 1e-9, "cycle L1 of the uniform 0.1 offset != 102.4");
    std::printf("    ssim=1 exact, psnr=%.12f dB, fd=%.2e, l1=%.12f\n", p, fd, l1);
}

// ---- criterion 6: zero-critic start ------------------------------------------
void criterion_zero_critic() {
    trainer::TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.seed = 20240006;
    trainer::TrainState st = trainer::TrainState::init(cfg);
    for (nets::DenseNet* net : {&st.d_x, &st.d_y}) {
        for (auto& l : net->layers) {
            std::fill(l.w.begin(), l.w.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
    }
    Rng rng(99);
    std::vector<ImageTensor> batch_x, batch_y;
    for (int i = 0; i < 4; ++i) {
        batch_x.push_back(test_helpers::random_image(rng));
        batch_y.push_back(test_helpers::random_image(rng));
    }
    trainer::train_step_critics(st, cfg, batch_x, batch_y);
    const double dy = st.history.critic[0].loss_dy;
    const double dx = st.history.critic[0].loss_dx;
    std::printf("    first critic losses %.12f / %.12f (lambda = 10)\n", dy, dx);
    require(std::abs(dy - 10.0) < 1e-9, "zero-critic D_Y loss != lambda");
    require(std::abs(dx - 10.0) < 1e-9, "zero-critic D_X loss != lambda");
}

// ---- criterion 7: dataset contract --------------------------------------------
void criterion_dataset() {
    const data::Mnist mnist = test_helpers::synthetic_mnist(1320, 20240007, 0);
    const fs::path dir1 = fs::temp_directory_path() / "ihqgan_acc_ds1";
    const fs::path dir2 = fs::temp_directory_path() / "ihqgan_acc_ds2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    const data::SubDataset ds = data::build_subdataset(mnist, data::Task::ImageDenoising, 0, 7);
    require(ds.train_a.size() == 1000 && ds.train_b.size() == 1000, "train split is not 1000 per domain");
    require(ds.test_a.size() == 250 && ds.test_b.size() == 250, "test split is not 250 per domain");
    for (const auto* group : {&ds.train_a, &ds.train_b, &ds.test_a, &ds.test_b}) {
        for (const ImageTensor& img : *group) {
            for (double v : img.pixels) {
                require(v >= 0.0 && v <= 1.0 && std::isfinite(v), "pixel out of [0,1]");
            }
        }
    }
    data::write_dataset(ds, dir1);
    data::write_dataset(data::build_subdataset(mnist, data::Task::ImageDenoising, 0, 7), dir2);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    require(slurp(dir1 / "manifest.txt") == slurp(dir2 / "manifest.txt"),
            "same-seed rebuild is not hash-identical");
    std::printf("    1000+250 per domain, rebuild manifest identical\n");
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

// ---- criterion 8: post-processing ----------------------------------------------
void criterion_postprocess() {
    Rng rng(20240008);
    const ImageTensor img = test_helpers::random_image(rng);
    const ImageTensor once = postprocess::post_process(img);
    int zeroed = 0;
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
            if (r <= 7 || r >= 26) {
                require(once.at(r, c) == 0.0, "border row pixel not zeroed");
                ++zeroed;
            } else {
                require(once.at(r, c) == img.at(r, c), "interior pixel not bit-identical");
            }
        }
    }
    require(zeroed == 448, "zeroed pixel count != 448");
    require(postprocess::post_process(once) == once, "post-processing is not idempotent");
    std::printf("    448 pixels zeroed, 576 untouched, idempotent\n");
}

// ---- criterion 9: desk-scale training smoke -------------------------------------
void criterion_training_smoke() {
    const auto t0 = std::chrono::steady_clock::now();
    const data::Mnist mnist = test_helpers::synthetic_mnist(1320, 20240009, 0);
    const data::SubDataset ds = data::build_subdataset(mnist, data::Task::ImageDenoising, 0, 9);

    trainer::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 10;
    cfg.n_critic = 5;
    cfg.limit_train = 200;
    cfg.seed = 20240009;
    cfg.sample_interval = 0;
    cfg.checkpoint_interval = 5;

    const fs::path out = fs::temp_directory_path() / "ihqgan_acc_smoke";
    fs::remove_all(out);
    const trainer::TrainState st = trainer::fit(cfg, ds, out);

    auto epoch_mean = [&](int epoch) {
        double acc = 0.0;
        int n = 0;
        for (const trainer::GenRecord& r : st.history.gen) {
            if (r.epoch == epoch) {
                acc += 0.5 * (r.total_g + r.total_f);
                ++n;
            }
        }
        require(n > 0, "no generator updates recorded for epoch " + std::to_string(epoch));
        return acc / n;
    };
    const double first = epoch_mean(1);
    const double last = epoch_mean(5);
    const double elapsed = seconds_since(t0);
    std::printf("    mean total generator loss: epoch1 %.3f -> epoch5 %.3f, %.1f s\n", first, last,
                elapsed);
    require(st.history.critic.size() == 100, "expected 100 critic steps (20 batches x 5 epochs)");
    require(st.history.gen.size() == 20, "expected 20 generator steps (n_c = 5)");
    require(last < first, "mean total generator loss did not decrease from epoch 1 to epoch 5");
    require(elapsed < 1800.0, "runtime exceeded 30 min");
    fs::remove_all(out);
}

// ---- criterion 10: hyperparameter study harness ----------------------------------
void criterion_study_harness() {
    // small in-memory dataset keeps the structural check quick
    const data::Mnist mnist = test_helpers::synthetic_mnist(24, 20240010, 0);
    data::SubDataset ds;
    ds.task = data::Task::ImageDenoising;
    ds.label = 0;
    ds.seed = 10;
    for (int i = 0; i < 16; ++i) {
        const ImageTensor clean = data::pad_to_32(mnist, i);
        ds.train_a.push_back(data::make_noisy(clean, 0.25, Rng::derive_seed(10, i)));
        ds.train_b.push_back(clean);
    }
    for (int i = 16; i < 24; ++i) {
        const ImageTensor clean = data::pad_to_32(mnist, i);
        const ImageTensor noisy = data::make_noisy(clean, 0.25, Rng::derive_seed(10, i));
        ds.test_a.push_back(noisy);
        ds.test_a_ref.push_back(clean);
        ds.test_b.push_back(clean);
        ds.test_b_ref.push_back(noisy);
    }
    const fs::path base = fs::temp_directory_path() / "ihqgan_acc_study";
    fs::remove_all(base);
    data::write_dataset(ds, base / "ds");

    config::RunConfig cfg;
    cfg.dataset_dir = (base / "ds").string();
    cfg.out_dir = (base / "runs").string();
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.n_c = 2;
    cfg.seed = 10;
    const fs::path csv = base / "curves.csv";
    const int rc = cli::cmd_study(cfg, csv.string(), cli::kDefaultStudyCombos);
    require(rc == 0, "study command failed");

    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    require(line == "task,label,eps,eta,rho,epoch,direction,FD,SSIM", "unexpected study CSV header");
    int rows = 0;
    std::set<std::string> combos_seen;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream fields(line);
        std::string f;
        std::vector<std::string> parts;
        while (std::getline(fields, f, ',')) parts.push_back(f);
        require(parts.size() == 9, "study row does not have 9 columns");
        combos_seen.insert(parts[2] + ":" + parts[3] + ":" + parts[4]);
    }
    // 5 published combinations x 2 epochs x 2 directions
    require(rows == 5 * 2 * 2, "study row count != combos x epochs x directions");
    require(combos_seen.count("1:10:150") == 1, "missing combination eps=1");
    require(combos_seen.count("10:20:300") == 1, "missing combination eps=10 2x");
    require(combos_seen.count("20:30:450") == 1, "missing combination eps=20 3x");
    std::printf("    20 curve rows over 5 combinations in the published grid\n");
    fs::remove_all(base);
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "inversion invariant over 1000 random draws", criterion_inversion},
        {2, "unitarity across 10^4 random gates", criterion_unitarity},
        {3, "finite-difference gradient audits", criterion_gradients},
        {4, "published parameter counts", criterion_param_counts},
        {5, "metric oracles (SSIM, PSNR, Frechet, cycle L1)", criterion_metric_oracles},
        {6, "zero-critic start equals lambda", criterion_zero_critic},
        {7, "dataset split contract and seed stability", criterion_dataset},
        {8, "post-processing row zeroing", criterion_postprocess},
        {9, "desk-scale training smoke", criterion_training_smoke},
        {10, "hyperparameter study harness schema", criterion_study_harness},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        std::printf("criterion %2d: %s\n", c.number, c.name.c_str());
        std::fflush(stdout);
        try {
            c.run();
            std::printf("PASS criterion %d\n", c.number);
        } catch (const std::exception& e) {
            std::printf("FAIL criterion %d: %s\n", c.number, e.what());
            ++failures;
        }
        std::fflush(stdout);
    }
    std::printf("%zu/%zu acceptance criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
