#include "voxshape/nn.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"

using namespace voxshape;
using namespace voxshape::nn;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.values) v = rng.uniform(-scale, scale);
    return t;
}

// Finite-difference check of a single layer against a fixed linear readout
// loss L = sum_i r_i * out_i; covers parameter and input gradients.
double check_layer(Layer<double>& layer, const Tensor<double>& input, bool train,
                   std::uint64_t seed) {
    Rng rng(seed);
    glorot_init(layer.params(), rng.next_u64());

    Tensor<double> probe = input;
    Tensor<double> readout;
    auto loss = [&]() {
        Tensor<double> out = layer.forward(probe, train);
        if (readout.values.empty()) {
            readout = Tensor<double>(out.shape);
            Rng r2(seed ^ 0xabcdef);
            for (auto& v : readout.values) v = r2.uniform(-1.0, 1.0);
        }
        double l = 0.0;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            l += out.values[i] * readout.values[i];
        }
        return l;
    };

    zero_grads(layer.params());
    loss();
    const Tensor<double> grad_in = layer.backward(readout);

    Param<double> input_param;
    input_param.name = "input";
    input_param.value = probe;
    input_param.grad = grad_in;

    auto params = layer.params();
    params.push_back(&input_param);

    auto loss_from_params = [&]() {
        probe = input_param.value;
        return loss();
    };
    return grad_check<double>(params, loss_from_params, 1e-6);
}

}  // namespace

TEST_CASE("conv3d identity kernel and ones kernel") {
    Conv3d<double> conv(1, 1, "c");
    auto params = conv.params();
    // Center-delta kernel: output equals input.
    params[0]->value.values[13] = 1.0;
    Rng rng(1);
    const auto in = random_tensor({1, 1, 5, 5, 5}, rng);
    const auto out = conv.forward(in, false);
    CHECK(out.shape == in.shape);
    for (std::size_t i = 0; i < in.values.size(); ++i) {
        CHECK(out.values[i] == doctest::Approx(in.values[i]));
    }

    // All-ones kernel on an all-ones input: interior value 27.
    params[0]->value.fill(1.0);
    Tensor<double> ones({1, 1, 5, 5, 5});
    ones.fill(1.0);
    const auto sum = conv.forward(ones, false);
    auto at = [&](int h, int w, int d) {
        return sum.values[std::size_t((h * 5 + w) * 5 + d)];
    };
    CHECK(at(2, 2, 2) == doctest::Approx(27.0));
    CHECK(at(0, 0, 0) == doctest::Approx(8.0));   // corner sees a 2x2x2 window
    CHECK(at(0, 2, 2) == doctest::Approx(18.0));  // face sees 2x3x3
}

TEST_CASE("relu backward zeroes negative inputs") {
    Relu<double> relu;
    Tensor<double> in({1, 4});
    in.values = {-1.0, 2.0, -3.0, 0.5};
    relu.forward(in, true);
    Tensor<double> g({1, 4});
    g.fill(1.0);
    const auto gi = relu.backward(g);
    CHECK(gi.values[0] == 0.0);
    CHECK(gi.values[1] == 1.0);
    CHECK(gi.values[2] == 0.0);
    CHECK(gi.values[3] == 1.0);
}

TEST_CASE("layer gradients match finite differences") {
    Rng rng(2024);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        {
            Conv3d<double> conv(2, 3, "c");
            const auto err =
                check_layer(conv, random_tensor({2, 2, 4, 4, 4}, rng), false, seed);
            CHECK(err < 1e-4);
        }
        {
            Dense<double> dense(6, 4, "d");
            const auto err = check_layer(dense, random_tensor({3, 6}, rng), false, seed);
            CHECK(err < 1e-4);
        }
        {
            BatchNorm<double> bn(3, "bn");
            const auto err =
                check_layer(bn, random_tensor({3, 3, 2, 2, 2}, rng), true, seed);
            CHECK(err < 1e-4);
        }
        {
            BatchNorm<double> bn(3, "bn_eval");
            auto ps = bn.params();
            for (auto& v : ps[2]->value.values) v = 0.3;  // running mean
            for (auto& v : ps[3]->value.values) v = 1.7;  // running var
            const auto err =
                check_layer(bn, random_tensor({1, 3, 2, 2, 2}, rng), false, seed);
            CHECK(err < 1e-4);
        }
        {
            MaxPool3d<double> pool({2, 2, 2});
            const auto err =
                check_layer(pool, random_tensor({2, 2, 4, 4, 4}, rng), false, seed);
            CHECK(err < 1e-4);
        }
        {
            UpsampleNearest<double> up({2, 2, 2});
            const auto err =
                check_layer(up, random_tensor({2, 2, 3, 3, 3}, rng), false, seed);
            CHECK(err < 1e-4);
        }
        {
            Sigmoid<double> sig;
            const auto err = check_layer(sig, random_tensor({2, 10}, rng), false, seed);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("batchnorm statistics") {
    BatchNorm<double> bn(2, "bn");
    Rng rng(7);
    const auto in = random_tensor({4, 2, 3, 3, 3}, rng, 2.0);
    const auto out = bn.forward(in, true);

    // Per-channel mean 0, variance 1 after normalization (identity affine).
    const std::int64_t plane = 27;
    for (int ch = 0; ch < 2; ++ch) {
        double mean = 0.0, var = 0.0;
        for (int b = 0; b < 4; ++b) {
            const double* p = out.data() + (std::int64_t(b) * 2 + ch) * plane;
            for (int i = 0; i < plane; ++i) mean += p[i];
        }
        mean /= 4.0 * plane;
        for (int b = 0; b < 4; ++b) {
            const double* p = out.data() + (std::int64_t(b) * 2 + ch) * plane;
            for (int i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
        }
        var /= 4.0 * plane;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

    // Running stats after one batch: (1 - m) * init + m * batch stats.
    auto ps = bn.params();
    for (int ch = 0; ch < 2; ++ch) {
        double bm = 0.0;
        for (int b = 0; b < 4; ++b) {
            const double* p = in.data() + (std::int64_t(b) * 2 + ch) * plane;
            for (int i = 0; i < plane; ++i) bm += p[i];
        }
        bm /= 4.0 * plane;
        double bv = 0.0;
        for (int b = 0; b < 4; ++b) {
            const double* p = in.data() + (std::int64_t(b) * 2 + ch) * plane;
            for (int i = 0; i < plane; ++i) bv += (p[i] - bm) * (p[i] - bm);
        }
        bv /= 4.0 * plane;
        CHECK(ps[2]->value.values[ch] == doctest::Approx(0.9 * 0.0 + 0.1 * bm));
        CHECK(ps[3]->value.values[ch] == doctest::Approx(0.9 * 1.0 + 0.1 * bv));
    }

    // Eval mode with unit running stats and identity affine is the identity.
    BatchNorm<double> fresh(2, "bn2");
    const auto id = fresh.forward(in, false);
    for (std::size_t i = 0; i < in.values.size(); ++i) {
        CHECK(id.values[i] == doctest::Approx(in.values[i]).epsilon(1e-4));
    }

    // Identical inputs across the batch: zero gradient for the scale.
    BatchNorm<double> flat_bn(1, "bn3");
    Tensor<double> same({3, 1, 2, 2, 2});
    same.fill(0.75);
    flat_bn.forward(same, true);
    Tensor<double> g(same.shape);
    g.fill(1.0);
    zero_grads(flat_bn.params());
    flat_bn.backward(g);
    CHECK(flat_bn.params()[0]->grad.values[0] == doctest::Approx(0.0));

    Tensor<double> single({1, 1, 2, 2, 2});
    CHECK_THROWS_AS(flat_bn.forward(single, true), DegenerateInputError);
}

TEST_CASE("maxpool then upsample preserves shape") {
    MaxPool3d<double> pool({2, 2, 2});
    UpsampleNearest<double> up({2, 2, 2});
    Rng rng(3);
    const auto in = random_tensor({2, 3, 4, 6, 8}, rng);
    const auto up_out = up.forward(pool.forward(in, false), false);
    CHECK(up_out.shape == in.shape);
}

TEST_CASE("adam update rules") {
    auto make_param = [](double v) {
        Param<float> p;
        p.init("p.weight", {1});
        p.value.values[0] = float(v);
        return p;
    };

    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    {
        // Zero gradient, zero moments: no movement.
        auto p = make_param(0.5);
        Adam<float> opt(cfg);
        opt.step({&p});
        CHECK(p.value.values[0] == doctest::Approx(0.5));
    }
    {
        // First step with unit gradient moves by about lr.
        auto p = make_param(0.5);
        p.grad.values[0] = 1.0f;
        Adam<float> opt(cfg);
        opt.step({&p});
        CHECK(0.5 - p.value.values[0] == doctest::Approx(1e-4).epsilon(1e-3));
    }
    {
        // Learning rate decays by 0.925 every 215 steps.
        auto p = make_param(0.5);
        Adam<float> opt(cfg);
        for (int i = 0; i < 215; ++i) opt.step({&p});
        CHECK(opt.lr() == doctest::Approx(1e-4 * 0.925));
        for (int i = 0; i < 215; ++i) opt.step({&p});
        CHECK(opt.lr() == doctest::Approx(1e-4 * 0.925 * 0.925));
    }
    {
        // lr 0 is the identity even with gradients and weight decay.
        AdamConfig zero = cfg;
        zero.lr = 0.0;
        zero.weight_decay = 1e-4;
        auto p = make_param(0.7);
        p.grad.values[0] = 3.0f;
        Adam<float> opt(zero);
        opt.step({&p});
        CHECK(p.value.values[0] == doctest::Approx(0.7));
    }
}

TEST_CASE("glorot init statistics") {
    double acc = 0.0, acc2 = 0.0;
    std::int64_t n = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Dense<double> dense(10, 10, "d");
        glorot_init(dense.params(), seed);
        const auto& w = dense.params()[0]->value.values;
        for (double v : w) {
            acc += v;
            acc2 += v * v;
            ++n;
        }
        for (double b : dense.params()[1]->value.values) CHECK(b == 0.0);
    }
    const double mean = acc / double(n);
    const double var = acc2 / double(n) - mean * mean;
    CHECK(std::abs(var - 0.1) < 0.02);

    Dense<double> a(8, 8, "a"), b(8, 8, "a");
    glorot_init(a.params(), 77);
    glorot_init(b.params(), 77);
    CHECK(a.params()[0]->value.values == b.params()[0]->value.values);
}

TEST_CASE("encoder and decoder wiring") {
    ArchConfig arch;
    arch.dims = GridDims(8, 8, 8);
    arch.stage_channels = {3, 4};
    arch.latent = 5;

    auto enc = make_encoder<double>(arch);
    auto dec = make_decoder<double>(arch);
    glorot_init(enc.params(), 1);
    glorot_init(dec.params(), 2);

    Rng rng(5);
    const auto in = random_tensor({2, 2, 8, 8, 8}, rng);
    const auto latent = enc.forward(in, true);
    CHECK(latent.mu.shape == std::vector<int>{2, 5});
    CHECK(latent.logvar.shape == std::vector<int>{2, 5});

    const auto out = dec.forward(latent.mu, true);
    CHECK(out.occ.shape == std::vector<int>{2, 1, 8, 8, 8});
    CHECK(out.sdf.shape == std::vector<int>{2, 1, 8, 8, 8});
    for (double v : out.occ.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    // Deterministic forward.
    auto enc2 = make_encoder<double>(arch);
    glorot_init(enc2.params(), 1);
    const auto latent2 = enc2.forward(in, true);
    CHECK(latent2.mu.values == latent.mu.values);
}

TEST_CASE("anisotropic dims derive mixed pooling windows") {
    ArchConfig arch;
    arch.dims = GridDims(24, 54, 24);
    arch.stage_channels = {2, 2, 2};
    const auto windows = arch.stage_windows();
    REQUIRE(windows.size() == 3);
    CHECK(windows[0] == std::array<int, 3>{2, 2, 2});  // 24,54,24 -> 12,27,12
    CHECK(windows[1] == std::array<int, 3>{2, 3, 2});  // -> 6,9,6
    CHECK(windows[2] == std::array<int, 3>{2, 3, 2});  // -> 3,3,3
    const auto spatial = arch.bottleneck_spatial();
    CHECK(spatial == std::array<int, 3>{3, 3, 3});

    auto enc = make_encoder<double>(arch);
    auto dec = make_decoder<double>(arch);
    glorot_init(enc.params(), 3);
    glorot_init(dec.params(), 4);
    Rng rng(6);
    const auto in = random_tensor({1, 2, 24, 54, 24}, rng);
    const auto latent = enc.forward(in, false);
    const auto out = dec.forward(latent.mu, false);
    CHECK(out.occ.shape == std::vector<int>{1, 1, 24, 54, 24});
}

TEST_CASE("full encoder gradient matches finite differences") {
    ArchConfig arch;
    arch.dims = GridDims(4, 4, 4);
    arch.stage_channels = {2, 3};
    arch.latent = 3;

    auto enc = make_encoder<double>(arch);
    glorot_init(enc.params(), 11);
    Rng rng(12);
    const auto in = random_tensor({2, 2, 4, 4, 4}, rng);

    Tensor<double> r_mu({2, 3}), r_lv({2, 3});
    Rng rr(13);
    for (auto& v : r_mu.values) v = rr.uniform(-1.0, 1.0);
    for (auto& v : r_lv.values) v = rr.uniform(-1.0, 1.0);

    auto loss = [&]() {
        const auto out = enc.forward(in, true);
        double l = 0.0;
        for (std::size_t i = 0; i < out.mu.values.size(); ++i) {
            l += out.mu.values[i] * r_mu.values[i] + out.logvar.values[i] * r_lv.values[i];
        }
        return l;
    };
    zero_grads(enc.params());
    loss();
    enc.backward(r_mu, r_lv);
    CHECK(grad_check<double>(enc.params(), loss, 1e-6) < 1e-4);
}

TEST_CASE("linear network with squared loss is exact") {
    Dense<double> dense(4, 2, "d");
    glorot_init(dense.params(), 3);
    Rng rng(4);
    const auto in = random_tensor({3, 4}, rng);
    const auto target = random_tensor({3, 2}, rng);

    auto loss = [&]() {
        const auto out = dense.forward(in, false);
        double l = 0.0;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            const double r = out.values[i] - target.values[i];
            l += 0.5 * r * r;
        }
        return l;
    };
    zero_grads(dense.params());
    const auto out = dense.forward(in, false);
    Tensor<double> g(out.shape);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        g.values[i] = out.values[i] - target.values[i];
    }
    dense.backward(g);
    CHECK(grad_check<double>(dense.params(), loss, 1e-5) < 1e-7);

    CHECK_THROWS_AS(grad_check<double>(dense.params(), loss, 0.0), DegenerateInputError);
}

TEST_CASE("checkpoint round trip") {
    ArchConfig arch;
    arch.dims = GridDims(8, 8, 8);
    arch.stage_channels = {3, 4};
    arch.latent = 5;

    auto enc = make_encoder<float>(arch);
    glorot_init(enc.params(), 21);

    Checkpoint ckpt;
    ckpt.meta["kind"] = "test";
    ckpt.meta["step"] = "42";
    ckpt.meta["arch"] = arch.serialize();
    export_params(enc.params(), ckpt);

    const auto dir = std::filesystem::temp_directory_path() / "voxshape_nn";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "enc.ckpt").string();
    write_checkpoint(path, ckpt);

    const auto back = read_checkpoint(path);
    CHECK(back.meta.at("kind") == "test");
    CHECK(back.meta.at("step") == "42");

    const auto arch2 = ArchConfig::deserialize(back.meta.at("arch"));
    CHECK(arch2.dims == arch.dims);
    CHECK(arch2.stage_channels == arch.stage_channels);
    CHECK(arch2.latent == arch.latent);

    auto enc2 = make_encoder<float>(arch2);
    import_params(back, enc2.params());
    Rng rng(9);
    Tensor<float> in({1, 2, 8, 8, 8});
    for (auto& v : in.values) v = float(rng.uniform(-1.0, 1.0));
    const auto a = enc.forward(in, false);
    const auto b = enc2.forward(in, false);
    CHECK(a.mu.values == b.mu.values);
    CHECK(a.logvar.values == b.logvar.values);
}
