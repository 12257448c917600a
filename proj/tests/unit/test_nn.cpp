#include "doctest.h"
#include "rml/nn.hpp"

#include <cmath>
#include <filesystem>

using namespace rml;
using namespace rml::nn;

namespace {

double squared_loss(const Mlp& net, const Matrix& in, const Matrix& target) {
    return 0.5 * (net.forward(in) - target).squaredNorm();
}

// Largest relative error between analytic and central-difference gradients.
double gradient_check(Mlp& net, const Matrix& in, const Matrix& target, double h = 1e-5) {
    Tape tape;
    const Matrix out = net.forward(in, tape);
    const Gradient g = net.backward(tape, out - target);
    double worst = 0.0;
    for (std::size_t l = 0; l < g.size(); ++l) {
        auto probe = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + h;
            const double up = squared_loss(net, in, target);
            p = saved - h;
            const double down = squared_loss(net, in, target);
            p = saved;
            const double numeric = (up - down) / (2 * h);
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            worst = std::max(worst, std::abs(numeric - analytic) / denom);
        };
        auto& layer = net.mutable_layers()[l];
        for (Index i = 0; i < layer.weight.size(); ++i) probe(layer.weight.data()[i], g[l].weight.data()[i]);
        for (Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias[i], g[l].bias[i]);
    }
    return worst;
}

}  // namespace

TEST_CASE("zero network maps anything to zero") {
    Mlp net({3, 4, 2});
    Rng rng = make_rng(1);
    Matrix in = standard_normal(5, 3, rng);
    CHECK(net.forward(in).isZero(0.0));
}

TEST_CASE("single identity layer passes the input through") {
    Mlp net({3, 3});
    net.mutable_layers()[0].weight = Matrix::Identity(3, 3);
    Matrix v(1, 3);
    v << 1.5, -2.0, 0.25;
    CHECK(net.forward(v) == v);
}

TEST_CASE("forward shape and dimension errors") {
    Rng rng = make_rng(2);
    Mlp net = Mlp::he_init({4, 8, 2}, {}, rng);
    CHECK(net.forward(standard_normal(3, 4, rng)).rows() == 3);
    CHECK(net.forward(standard_normal(3, 4, rng)).cols() == 2);
    CHECK_THROWS_AS(net.forward(standard_normal(3, 5, rng)), ConfigError);
    CHECK_THROWS_AS(Mlp({4, 0, 2}), ConfigError);
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng = make_rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Mlp net = Mlp::he_init({3, 16, 16, 2}, {}, rng);
        for (auto& layer : net.mutable_layers()) layer.bias = 0.1 * standard_normal(layer.bias.size(), 1, rng);
        Matrix in = standard_normal(7, 3, rng);
        Matrix target = standard_normal(7, 2, rng);
        CHECK(gradient_check(net, in, target) < 1e-4);
    }
}

TEST_CASE("zero adjoint and fitted linear layer give zero gradient") {
    Rng rng = make_rng(4);
    Mlp net = Mlp::he_init({2, 5, 1}, {}, rng);
    Matrix in = standard_normal(4, 2, rng);
    Tape tape;
    net.forward(in, tape);
    for (const auto& layer : net.backward(tape, Matrix::Zero(4, 1))) {
        CHECK(layer.weight.isZero(0.0));
        CHECK(layer.bias.isZero(0.0));
    }

    Mlp lin({2, 1});
    lin.mutable_layers()[0].weight << 2.0, -1.0;
    Tape t2;
    const Matrix out = lin.forward(in, t2);
    const Gradient g = lin.backward(t2, out - in * Vector{{2.0, -1.0}});
    CHECK(g[0].weight.norm() < 1e-14);
}

TEST_CASE("backward without matching forward is a usage error") {
    Rng rng = make_rng(5);
    Mlp net = Mlp::he_init({2, 3, 1}, {}, rng);
    Tape empty;
    CHECK_THROWS_AS(net.backward(empty, Matrix::Zero(1, 1)), UsageError);
    Tape tape;
    net.forward(standard_normal(4, 2, rng), tape);
    CHECK_THROWS_AS(net.backward(tape, Matrix::Zero(3, 1)), UsageError);
    net.mutable_layers();  // parameters may have changed
    CHECK_THROWS_AS(net.backward(tape, Matrix::Zero(4, 1)), UsageError);
}

TEST_CASE("adam: zero gradient, first step, scalar quadratic") {
    Rng rng = make_rng(6);
    Mlp net = Mlp::he_init({2, 3, 1}, {}, rng);
    const auto before = net.layers();
    AdamState state(net, {.learning_rate = 0.1});
    adam_step(net, state, net.zero_gradient());
    CHECK(state.step == 1);
    for (std::size_t l = 0; l < before.size(); ++l) CHECK(net.layers()[l].weight == before[l].weight);

    AdamConfig cfg{.learning_rate = 0.01};
    Vector p = Vector::Zero(3);
    Vector g(3);
    g << 0.5, -3.0, 1e-3;
    VectorAdam opt(3, cfg);
    opt.step(p, g);
    for (Index i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(-cfg.learning_rate * (g[i] > 0 ? 1 : -1)).epsilon(1e-4));

    Vector theta = Vector::Zero(1);
    VectorAdam quad(1, {.learning_rate = 0.1});
    for (int i = 0; i < 500; ++i) quad.step(theta, Vector::Constant(1, 2.0 * (theta[0] - 3.0)));
    CHECK(std::abs(theta[0] - 3.0) < 1e-2);
}

TEST_CASE("adam rejects non-finite gradients by block name") {
    Rng rng = make_rng(7);
    Mlp net = Mlp::he_init({2, 3, 1}, {}, rng);
    AdamState state(net, {});
    Gradient g = net.zero_gradient();
    g[1].bias[0] = std::nan("");
    try {
        adam_step(net, state, g);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer 1 bias") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip is lossless") {
    Rng rng = make_rng(8);
    Mlp net = Mlp::he_init({5, 7, 3}, {.state_dim = 2, .covariate_dim = 0, .time_input = true, .noise_dim = 2}, rng);
    const auto path = std::filesystem::temp_directory_path() / "rml_ckpt_test.json";
    net.save(path);
    Mlp back = Mlp::load(path);
    std::filesystem::remove(path);
    CHECK(back.layout() == net.layout());
    CHECK(back.widths() == net.widths());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        CHECK(back.layers()[l].weight == net.layers()[l].weight);
        CHECK(back.layers()[l].bias == net.layers()[l].bias);
    }
}

TEST_CASE("identical seeds give identical trajectories") {
    auto run = [] {
        Rng rng = make_rng(9);
        Mlp net = Mlp::he_init({2, 8, 1}, {}, rng);
        AdamState st(net, {.learning_rate = 1e-2});
        for (int i = 0; i < 20; ++i) {
            Matrix in = standard_normal(16, 2, rng);
            Tape tape;
            Matrix out = net.forward(in, tape);
            adam_step(net, st, net.backward(tape, out - in.col(0)));
        }
        return net.layers()[0].weight;
    };
    CHECK(run() == run());
}
