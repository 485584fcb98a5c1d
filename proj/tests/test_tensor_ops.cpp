#include <catch2/catch_amalgamated.hpp>

#include "rose/tensor.hpp"
#include "test_helpers.hpp"

using namespace rose;
using testutil::central_diff;
using testutil::grad_close;
using testutil::random_kernel;
using testutil::random_map;

TEST_CASE("conv2d zero-padding arithmetic on a constant input") {
    FeatureMap<double> in(1, 4, 4, 1.0);
    ConvKernel<double> k(1, 1, 3, 3);
    for (auto& w : k.weights) w = 1.0;

    const auto out = conv2d(in, k);
    REQUIRE(out.channels == 1);
    REQUIRE(out.height == 4);
    REQUIRE(out.width == 4);
    CHECK(out.at(0, 1, 1) == 9.0);
    CHECK(out.at(0, 1, 2) == 9.0);
    CHECK(out.at(0, 0, 1) == 6.0);
    CHECK(out.at(0, 2, 0) == 6.0);
    CHECK(out.at(0, 0, 0) == 4.0);
    CHECK(out.at(0, 3, 3) == 4.0);
}

TEST_CASE("conv2d with a unit 1x1 kernel is the identity") {
    Rng rng(11);
    const auto in = random_map<double>(3, 5, 7, rng);
    ConvKernel<double> k(3, 3, 1, 1);
    for (int c = 0; c < 3; ++c) k.w(c, c, 0, 0) = 1.0;

    const auto out = conv2d(in, k);
    REQUIRE(out.values == in.values);
}

TEST_CASE("conv2d matches the quadruple-loop oracle") {
    Rng rng(12);
    const auto in = random_map<double>(3, 8, 8, rng);
    const auto k = random_kernel<double>(4, 3, 3, 3, rng);

    const auto fast = conv2d(in, k);
    const auto slow = testutil::naive_conv2d(in, k);
    REQUIRE(fast.same_shape(slow));
    for (std::size_t i = 0; i < fast.size(); ++i)
        REQUIRE(std::abs(fast.values[i] - slow.values[i]) < 1e-6);
}

TEST_CASE("conv2d keeps spatial dims for every odd kernel size") {
    Rng rng(13);
    const auto in = random_map<double>(2, 6, 9, rng);
    for (int ks : {1, 3, 5, 7}) {
        const auto k = random_kernel<double>(3, 2, ks, ks, rng);
        const auto out = conv2d(in, k);
        CHECK(out.height == in.height);
        CHECK(out.width == in.width);
    }
}

TEST_CASE("conv2d structural errors") {
    FeatureMap<double> in(2, 4, 4, 0.0);
    CHECK_THROWS_AS(conv2d(in, ConvKernel<double>(1, 3, 3, 3)), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(in, ConvKernel<double>(1, 2, 2, 2)), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(FeatureMap<double>{}, ConvKernel<double>(1, 1, 1, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(FeatureMap<double>(0, 4, 4), std::invalid_argument);
}

TEST_CASE("conv2d_backward trivial cases") {
    Rng rng(14);
    auto in = random_map<double>(2, 5, 5, rng);

    SECTION("zero grad_out gives zero gradients") {
        const auto k = random_kernel<double>(3, 2, 3, 3, rng);
        FeatureMap<double> gz(3, 5, 5, 0.0);
        const auto g = conv2d_backward(in, k, gz);
        for (double v : g.input.values) CHECK(v == 0.0);
        for (double v : g.kernel.weights) CHECK(v == 0.0);
        for (double v : g.kernel.bias) CHECK(v == 0.0);
    }

    SECTION("unit 1x1 kernel passes grad_out through") {
        ConvKernel<double> k(2, 2, 1, 1);
        k.w(0, 0, 0, 0) = 1.0;
        k.w(1, 1, 0, 0) = 1.0;
        const auto go = random_map<double>(2, 5, 5, rng);
        const auto g = conv2d_backward(in, k, go);
        REQUIRE(g.input.values == go.values);
    }

    SECTION("grad_out shape mismatch is a structural error") {
        const auto k = random_kernel<double>(3, 2, 3, 3, rng);
        CHECK_THROWS_AS(conv2d_backward(in, k, FeatureMap<double>(3, 4, 5, 0.0)),
                        std::invalid_argument);
    }
}

TEST_CASE("conv2d_backward matches finite differences everywhere") {
    Rng rng(15);
    auto in = random_map<double>(2, 6, 6, rng);
    auto k = random_kernel<double>(3, 2, 3, 3, rng);
    const auto weight = random_map<double>(3, 6, 6, rng);  // fixed linear functional

    auto loss = [&] { return testutil::weighted_sum(conv2d(in, k), weight); };
    const auto g = conv2d_backward(in, k, weight);

    for (auto& x : in.values) {
        const std::size_t i = static_cast<std::size_t>(&x - in.values.data());
        REQUIRE(grad_close(g.input.values[i], central_diff(x, loss), 1e-4));
    }
    for (auto& x : k.weights) {
        const std::size_t i = static_cast<std::size_t>(&x - k.weights.data());
        REQUIRE(grad_close(g.kernel.weights[i], central_diff(x, loss), 1e-4));
    }
    for (auto& x : k.bias) {
        const std::size_t i = static_cast<std::size_t>(&x - k.bias.data());
        REQUIRE(grad_close(g.kernel.bias[i], central_diff(x, loss), 1e-4));
    }
}

TEST_CASE("maxpool2x2 basics") {
    FeatureMap<double> in(1, 2, 2);
    in.at(0, 0, 0) = 1;
    in.at(0, 0, 1) = 2;
    in.at(0, 1, 0) = 3;
    in.at(0, 1, 1) = 4;
    const auto r = maxpool2x2(in);
    REQUIRE(r.output.size() == 1);
    CHECK(r.output.values[0] == 4.0);
    CHECK(r.argmax[0] == 3);

    FeatureMap<double> c(3, 4, 6, 2.5);
    const auto rc = maxpool2x2(c);
    for (double v : rc.output.values) CHECK(v == 2.5);

    CHECK_THROWS_AS(maxpool2x2(FeatureMap<double>(1, 3, 4, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(maxpool2x2(FeatureMap<double>(1, 4, 5, 0.0)), std::invalid_argument);
}

TEST_CASE("maxpool2x2 ties break to the first cell in row-major order") {
    FeatureMap<double> in(1, 2, 2, 7.0);
    const auto r = maxpool2x2(in);
    CHECK(r.argmax[0] == 0);
}

TEST_CASE("maxpool2x2 output max equals input max") {
    Rng rng(16);
    const auto in = random_map<double>(3, 8, 8, rng);
    const auto r = maxpool2x2(in);
    const double in_max = *std::max_element(in.values.begin(), in.values.end());
    const double out_max = *std::max_element(r.output.values.begin(), r.output.values.end());
    CHECK(in_max == out_max);
}

TEST_CASE("maxpool2x2 backward routes to argmax cells and matches finite differences") {
    Rng rng(17);
    auto in = random_map<double>(2, 8, 8, rng);  // random doubles: no ties
    const auto weight = random_map<double>(2, 4, 4, rng);

    const auto r = maxpool2x2(in);
    const auto grad = maxpool2x2_backward(weight, r.argmax, 2, 8, 8);

    int nonzero = 0;
    for (double v : grad.values)
        if (v != 0.0) ++nonzero;
    CHECK(nonzero == static_cast<int>(weight.size()));

    auto loss = [&] { return testutil::weighted_sum(maxpool2x2(in).output, weight); };
    for (auto& x : in.values) {
        const std::size_t i = static_cast<std::size_t>(&x - in.values.data());
        REQUIRE(grad_close(grad.values[i], central_diff(x, loss), 1e-4));
    }
}

TEST_CASE("channel_pool mean and max channels") {
    SECTION("two constant channels") {
        FeatureMap<double> in(2, 3, 3, 0.0);
        for (std::size_t i = 0; i < in.plane_size(); ++i) in.plane(1)[i] = 1.0;
        const auto out = channel_pool(in);
        REQUIRE(out.channels == 2);
        for (std::size_t i = 0; i < out.plane_size(); ++i) {
            CHECK(out.plane(0)[i] == 0.5);
            CHECK(out.plane(1)[i] == 1.0);
        }
    }

    SECTION("single channel duplicates the input") {
        Rng rng(18);
        const auto in = random_map<double>(1, 4, 5, rng);
        const auto out = channel_pool(in);
        for (std::size_t i = 0; i < in.plane_size(); ++i) {
            CHECK(out.plane(0)[i] == in.values[i]);
            CHECK(out.plane(1)[i] == in.values[i]);
        }
    }

    SECTION("matches the per-pixel loop oracle exactly") {
        Rng rng(19);
        const auto in = random_map<double>(5, 4, 4, rng);
        const auto out = channel_pool(in);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                double s = 0.0, m = in.at(0, y, x);
                for (int c = 0; c < 5; ++c) {
                    s += in.at(c, y, x);
                    m = std::max(m, in.at(c, y, x));
                }
                CHECK(out.at(0, y, x) == s / 5.0);
                CHECK(out.at(1, y, x) == m);
            }
    }

    SECTION("backward matches finite differences") {
        Rng rng(20);
        auto in = random_map<double>(4, 3, 3, rng);
        const auto weight = random_map<double>(2, 3, 3, rng);
        const auto grad = channel_pool_backward(in, weight);
        auto loss = [&] { return testutil::weighted_sum(channel_pool(in), weight); };
        for (auto& x : in.values) {
            const std::size_t i = static_cast<std::size_t>(&x - in.values.data());
            REQUIRE(grad_close(grad.values[i], central_diff(x, loss), 1e-4));
        }
    }
}

TEST_CASE("sigmoid values and saturation") {
    FeatureMap<double> in(1, 1, 3);
    in.values = {0.0, -50.0, -1e6};
    const auto out = sigmoid(in);
    CHECK(out.values[0] == 0.5);
    CHECK(out.values[1] < 1e-6);
    CHECK(std::isfinite(out.values[2]));
    CHECK(out.values[2] < 1e-6);
}

TEST_CASE("sigmoid stays strictly inside (0,1) and backward matches finite differences") {
    Rng rng(21);
    auto in = random_map<double>(2, 4, 4, rng, -6.0, 6.0);
    const auto out = sigmoid(in);
    for (double v : out.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    // products of sigmoid outputs stay inside (0,1)
    const auto prod = multiply(out, sigmoid(random_map<double>(2, 4, 4, rng, -6.0, 6.0)));
    for (double v : prod.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    const auto weight = random_map<double>(2, 4, 4, rng);
    const auto grad = sigmoid_backward(out, weight);
    auto loss = [&] { return testutil::weighted_sum(sigmoid(in), weight); };
    for (auto& x : in.values) {
        const std::size_t i = static_cast<std::size_t>(&x - in.values.data());
        REQUIRE(grad_close(grad.values[i], central_diff(x, loss), 1e-5));
    }
}

TEST_CASE("relu forward and backward") {
    FeatureMap<double> in(1, 1, 2);
    in.values = {-1.0, 2.0};
    const auto out = relu(in);
    CHECK(out.values[0] == 0.0);
    CHECK(out.values[1] == 2.0);

    Rng rng(22);
    auto r = random_map<double>(2, 5, 5, rng);
    for (auto& v : r.values)
        if (std::abs(v) < 1e-3) v = 0.5;  // keep finite differences away from the kink
    const auto weight = random_map<double>(2, 5, 5, rng);
    const auto grad = relu_backward(relu(r), weight);
    auto loss = [&] { return testutil::weighted_sum(relu(r), weight); };
    for (auto& x : r.values) {
        const std::size_t i = static_cast<std::size_t>(&x - r.values.data());
        REQUIRE(grad_close(grad.values[i], central_diff(x, loss), 1e-4));
    }
}

TEST_CASE("upsample2x doubles pixels into blocks") {
    FeatureMap<double> one(1, 1, 1, 3.5);
    const auto up = upsample2x(one);
    REQUIRE(up.height == 2);
    REQUIRE(up.width == 2);
    for (double v : up.values) CHECK(v == 3.5);

    Rng rng(23);
    const auto in = random_map<double>(2, 3, 4, rng);
    const auto twice = upsample2x(upsample2x(in));
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < twice.height; ++y)
            for (int x = 0; x < twice.width; ++x)
                CHECK(twice.at(c, y, x) == in.at(c, y / 4, x / 4));

    double in_sum = 0.0, up_sum = 0.0;
    for (double v : in.values) in_sum += v;
    for (double v : upsample2x(in).values) up_sum += v;
    CHECK_THAT(up_sum, Catch::Matchers::WithinRel(4.0 * in_sum, 1e-12));
}

TEST_CASE("upsample2x backward sums the 2x2 gradient blocks") {
    Rng rng(24);
    auto in = random_map<double>(1, 3, 3, rng);
    const auto weight = random_map<double>(1, 6, 6, rng);
    const auto grad = upsample2x_backward(weight);
    auto loss = [&] { return testutil::weighted_sum(upsample2x(in), weight); };
    for (auto& x : in.values) {
        const std::size_t i = static_cast<std::size_t>(&x - in.values.data());
        REQUIRE(grad_close(grad.values[i], central_diff(x, loss), 1e-5));
    }
}

TEST_CASE("multiply elementwise and broadcast") {
    Rng rng(25);
    const auto a = random_map<double>(3, 4, 4, rng);

    FeatureMap<double> ones(3, 4, 4, 1.0);
    CHECK(multiply(a, ones).values == a.values);

    FeatureMap<double> zeros(3, 4, 4, 0.0);
    for (double v : multiply(zeros, a).values) CHECK(v == 0.0);

    const auto b = random_map<double>(1, 4, 4, rng);
    const auto out = multiply(a, b);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) CHECK(out.at(c, y, x) == a.at(c, y, x) * b.at(0, y, x));

    CHECK_THROWS_AS(multiply(a, FeatureMap<double>(2, 4, 4, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(multiply(a, FeatureMap<double>(3, 4, 5, 0.0)), std::invalid_argument);
}

TEST_CASE("multiply backward matches finite differences in the broadcast case") {
    Rng rng(26);
    auto a = random_map<double>(3, 4, 4, rng);
    auto b = random_map<double>(1, 4, 4, rng);
    const auto weight = random_map<double>(3, 4, 4, rng);

    const auto [ga, gb] = multiply_backward(a, b, weight);
    auto loss = [&] { return testutil::weighted_sum(multiply(a, b), weight); };
    for (auto& x : a.values) {
        const std::size_t i = static_cast<std::size_t>(&x - a.values.data());
        REQUIRE(grad_close(ga.values[i], central_diff(x, loss), 1e-5));
    }
    for (auto& x : b.values) {
        const std::size_t i = static_cast<std::size_t>(&x - b.values.data());
        REQUIRE(grad_close(gb.values[i], central_diff(x, loss), 1e-5));
    }
}

TEST_CASE("forward passes are bit-deterministic") {
    Rng rng(27);
    const auto in = random_map<float>(3, 8, 8, rng);
    const auto k = random_kernel<float>(4, 3, 3, 3, rng);
    const auto a = conv2d(in, k);
    const auto b = conv2d(in, k);
    REQUIRE(a.values == b.values);

    const auto s1 = sigmoid(in);
    const auto s2 = sigmoid(in);
    REQUIRE(s1.values == s2.values);
}
