#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "ihqgan/trainer.hpp"
#include "helpers.hpp"

using namespace ihqgan;
using namespace ihqgan::trainer;
namespace fs = std::filesystem;

namespace {

// A small in-memory denoising-style dataset; big enough for batches, small
// enough to keep these tests quick.
data::SubDataset tiny_dataset(int n_train, int n_test, std::uint64_t seed) {
    data::Mnist m = test_helpers::synthetic_mnist(n_train + n_test, seed, 0);
    data::SubDataset ds;
    ds.task = data::Task::ImageDenoising;
    ds.label = 0;
    ds.seed = seed;
    for (int i = 0; i < n_train; ++i) {
        const ImageTensor clean = data::pad_to_32(m, i);
        ds.train_a.push_back(data::make_noisy(clean, 0.25, Rng::derive_seed(seed, i)));
        ds.train_b.push_back(clean);
    }
    for (int i = n_train; i < n_train + n_test; ++i) {
        const ImageTensor clean = data::pad_to_32(m, i);
        const ImageTensor noisy = data::make_noisy(clean, 0.25, Rng::derive_seed(seed, i));
        ds.test_a.push_back(noisy);
        ds.test_a_ref.push_back(clean);
        ds.test_b.push_back(clean);
        ds.test_b_ref.push_back(noisy);
    }
    return ds;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.n_critic = 2;
    cfg.seed = 7;
    cfg.sample_interval = 0;
    cfg.checkpoint_interval = 0;
    return cfg;
}

double checksum(std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * static_cast<double>((i % 97) + 1);
    return acc;
}

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("train state holds one shared generator storage", "[trainer]") {
    TrainState st = TrainState::init(tiny_config());
    REQUIRE(st.generator_parameter_count() == 5760);
    REQUIRE(st.d_x.param_count() == 1024 * 512 + 512 + 512 * 256 + 256 + 256 + 1);
    REQUIRE(st.adam_gen_g.m.size() == 5760);
    REQUIRE(st.adam_gen_f.m.size() == 5760);
}

TEST_CASE("critic step with zero critics starts at lambda", "[trainer]") {
    TrainConfig cfg = tiny_config();
    TrainState st = TrainState::init(cfg);
    for (nets::DenseNet* net : {&st.d_x, &st.d_y}) {
        for (auto& l : net->layers) {
            std::fill(l.w.begin(), l.w.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
    }
    data::SubDataset ds = tiny_dataset(8, 2, 5);
    const double gen_checksum = checksum(st.shared.angles);

    train_step_critics(st, cfg, std::span(ds.train_a).subspan(0, 4), std::span(ds.train_b).subspan(0, 4));

    REQUIRE(st.history.critic.size() == 1);
    REQUIRE(st.history.critic[0].loss_dy == Catch::Approx(10.0).margin(1e-9));
    REQUIRE(st.history.critic[0].loss_dx == Catch::Approx(10.0).margin(1e-9));
    REQUIRE(st.batch_counter == 1);
    REQUIRE(checksum(st.shared.angles) == gen_checksum);   // generators untouched
}

TEST_CASE("generator step drives both directions through shared storage", "[trainer]") {
    TrainConfig cfg = tiny_config();
    TrainState st = TrainState::init(cfg);
    data::SubDataset ds = tiny_dataset(8, 2, 6);

    const ImageTensor probe = ds.test_b[0];
    const ImageTensor f_before = qgen::translate(probe, st.shared, qgen::Direction::Inverse, cfg.decode);

    train_step_generators(st, cfg, std::span(ds.train_a).subspan(0, 4), std::span(ds.train_b).subspan(0, 4));

    // after the G-side update landed in the shared tensor, F's output moves
    const ImageTensor f_after = qgen::translate(probe, st.shared, qgen::Direction::Inverse, cfg.decode);
    REQUIRE(f_before != f_after);

    REQUIRE(st.history.gen.size() == 1);
    const GenRecord& rec = st.history.gen[0];
    REQUIRE(std::isfinite(rec.adv_g));
    REQUIRE(rec.cyc_g > 0.0);
    REQUIRE(rec.iqa_g >= 0.0);
    REQUIRE(rec.total_g == Catch::Approx(10.0 * rec.adv_g + 20.0 * rec.cyc_g + 300.0 * rec.iqa_g));
    REQUIRE(std::isfinite(rec.total_f));
}

TEST_CASE("update cadence over batches", "[trainer]") {
    TrainConfig cfg = tiny_config();
    cfg.batch_size = 10;
    cfg.n_critic = 2;
    cfg.epochs = 1;
    data::SubDataset ds = tiny_dataset(20, 2, 8);

    const fs::path dir = temp_dir("ihqgan_fit_cadence");
    TrainState st = fit(cfg, ds, dir);
    // 20 images, m=10: exactly 2 critic steps; n_c=2: exactly 1 generator step
    REQUIRE(st.batch_counter == 2);
    REQUIRE(st.history.critic.size() == 2);
    REQUIRE(st.history.gen.size() == 1);

    cfg.epochs = 3;
    cfg.n_critic = 3;
    TrainState st3 = fit(cfg, ds, dir);
    REQUIRE(st3.batch_counter == 6);
    REQUIRE(st3.history.critic.size() == 6);
    REQUIRE(st3.history.gen.size() == 2);   // floor(6 / 3)
    fs::remove_all(dir);
}

TEST_CASE("fit is deterministic given the seed", "[trainer][slow]") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 2;
    data::SubDataset ds = tiny_dataset(8, 2, 9);

    const fs::path d1 = temp_dir("ihqgan_fit_det1");
    const fs::path d2 = temp_dir("ihqgan_fit_det2");
    TrainState a = fit(cfg, ds, d1);
    TrainState b = fit(cfg, ds, d2);

    REQUIRE(a.shared.angles == b.shared.angles);
    REQUIRE(a.history.critic.size() == b.history.critic.size());
    for (std::size_t i = 0; i < a.history.critic.size(); ++i) {
        REQUIRE(a.history.critic[i].loss_dy == b.history.critic[i].loss_dy);
        REQUIRE(a.history.critic[i].loss_dx == b.history.critic[i].loss_dx);
    }
    for (std::size_t i = 0; i < a.history.gen.size(); ++i) {
        REQUIRE(a.history.gen[i].total_g == b.history.gen[i].total_g);
        REQUIRE(a.history.gen[i].total_f == b.history.gen[i].total_f);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("checkpoint round trip and exact resume", "[trainer][slow]") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 2;
    cfg.checkpoint_interval = 1;
    data::SubDataset ds = tiny_dataset(8, 2, 10);

    const fs::path straight_dir = temp_dir("ihqgan_fit_str");
    TrainState straight = fit(cfg, ds, straight_dir);

    TrainConfig one = cfg;
    one.epochs = 1;
    const fs::path resumed_dir = temp_dir("ihqgan_fit_res");
    fit(one, ds, resumed_dir);

    TrainState loaded = load_checkpoint(resumed_dir / "checkpoints" / "epoch_001", cfg);
    REQUIRE(loaded.epochs_done == 1);
    REQUIRE(loaded.batch_counter == 2);   // continues the batch counter exactly

    TrainState resumed = fit(cfg, ds, resumed_dir, std::move(loaded));
    REQUIRE(resumed.batch_counter == straight.batch_counter);
    REQUIRE(resumed.shared.angles == straight.shared.angles);
    REQUIRE(resumed.d_y.flatten_params() == straight.d_y.flatten_params());
    REQUIRE(resumed.adam_gen_g.t == straight.adam_gen_g.t);
    REQUIRE(resumed.history.critic.size() == straight.history.critic.size());
    REQUIRE(resumed.history.critic.back().loss_dx == straight.history.critic.back().loss_dx);

    fs::remove_all(straight_dir);
    fs::remove_all(resumed_dir);
}

TEST_CASE("fit writes history and grids", "[trainer]") {
    TrainConfig cfg = tiny_config();
    cfg.sample_interval = 1;
    cfg.checkpoint_interval = 1;
    data::SubDataset ds = tiny_dataset(8, 8, 11);

    const fs::path dir = temp_dir("ihqgan_fit_art");
    fit(cfg, ds, dir);
    REQUIRE(fs::exists(dir / "critic_history.csv"));
    REQUIRE(fs::exists(dir / "gen_history.csv"));
    REQUIRE(fs::exists(dir / "checkpoints" / "epoch_001" / "generator.bin"));
    REQUIRE(fs::exists(dir / "samples" / "epoch_001_G.png"));
    REQUIRE(fs::exists(dir / "samples" / "epoch_001_F.png"));

    const auto grid = pngio::decode_gray8(pngio::read_file(dir / "samples" / "epoch_001_G.png"));
    REQUIRE(grid.height == 5 * 32);   // Source/Generated/Post/Reference/|diff|
    REQUIRE(grid.width == 8 * 32);
    fs::remove_all(dir);
}

TEST_CASE("literal adversarial sign flips the generator gradient direction", "[trainer]") {
    data::SubDataset ds = tiny_dataset(8, 2, 12);

    auto run_once = [&](losses::AdvSign sign) {
        TrainConfig cfg = tiny_config();
        cfg.adv_sign = sign;
        cfg.weights.eta = 0.0;   // isolate the adversarial path
        cfg.weights.rho = 0.0;
        TrainState st = TrainState::init(cfg);
        train_step_generators(st, cfg, std::span(ds.train_a).subspan(0, 4),
                              std::span(ds.train_b).subspan(0, 4));
        return st;
    };

    TrainState std_state = run_once(losses::AdvSign::Standard);
    TrainState lit_state = run_once(losses::AdvSign::Literal);

    // same init, opposite adversarial upstream: the G-side Adam first step
    // moves every touched angle the opposite way
    REQUIRE(std_state.shared.angles != lit_state.shared.angles);
    REQUIRE(std_state.history.gen[0].adv_g == Catch::Approx(-lit_state.history.gen[0].adv_g).margin(1e-12));
}

TEST_CASE("frozen ACNNs keep their parameters", "[trainer]") {
    TrainConfig cfg = tiny_config();
    cfg.train_acnns = false;
    TrainState st = TrainState::init(cfg);
    data::SubDataset ds = tiny_dataset(8, 2, 13);
    const auto q_before = st.q.flatten_params();
    const auto r_before = st.r.flatten_params();
    train_step_generators(st, cfg, std::span(ds.train_a).subspan(0, 4),
                          std::span(ds.train_b).subspan(0, 4));
    REQUIRE(st.q.flatten_params() == q_before);
    REQUIRE(st.r.flatten_params() == r_before);

    cfg.train_acnns = true;
    TrainState st2 = TrainState::init(cfg);
    train_step_generators(st2, cfg, std::span(ds.train_a).subspan(0, 4),
                          std::span(ds.train_b).subspan(0, 4));
    REQUIRE(st2.q.flatten_params() != q_before);
}

TEST_CASE("config validation", "[trainer]") {
    TrainConfig cfg = tiny_config();
    cfg.n_critic = 0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.lr_gen = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.weights.eta = -3;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
