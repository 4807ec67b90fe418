#include <catch2/catch_amalgamated.hpp>

#include "helpers/gradcheck.hpp"
#include "helpers/testutil.hpp"
#include "isgan/core/nn.hpp"
#include "isgan/core/optim.hpp"
#include "isgan/core/serialize.hpp"

using namespace isgan;
using testutil::gradcheck;
using testutil::random_tensor;

TEST_CASE("tensor basics") {
    Tensor t({2, 3}, 1.5);
    REQUIRE(t.numel() == 6);
    REQUIRE(t.sum() == Catch::Approx(9.0));
    Tensor r = t.reshaped({3, 2});
    REQUIRE(r.dim(0) == 3);
    REQUIRE_THROWS(t.reshaped({4, 2}));
    REQUIRE(t.all_finite());
    t[0] = std::nan("");
    REQUIRE_FALSE(t.all_finite());
}

TEST_CASE("rng determinism and stream independence") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RngStream root(7);
    auto s1 = root.derive(1, 2, 3);
    auto s2 = root.derive(1, 2, 4);
    REQUIRE(s1.state() != s2.state());
    // derivation is pure
    REQUIRE(root.derive(1, 2, 3).state() == s1.state());

    // normals are roughly standard
    RngStream n(99);
    double sum = 0, sq = 0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        double x = n.normal();
        sum += x;
        sq += x * x;
    }
    REQUIRE(std::abs(sum / N) < 0.03);
    REQUIRE(std::abs(sq / N - 1.0) < 0.05);
}

TEST_CASE("elementwise and reduction gradients") {
    RngStream rng(11);
    Var a = Var::leaf(random_tensor({3, 4}, rng.derive(0)));
    Var b = Var::leaf(random_tensor({3, 4}, rng.derive(1)));

    SECTION("add/sub/mul/scale/offset") {
        auto f = [&] {
            return sum(mul(add(a, b), offset(scale(sub(a, b), 0.7), 0.3)));
        };
        REQUIRE(gradcheck(f, {a, b}) < 1e-7);
    }
    SECTION("abs/exp/log/tanh/sigmoid/leaky") {
        auto f = [&] {
            Var t = vtanh(a);
            Var s = vsigmoid(b);
            Var e = vexp(scale(a, 0.3));
            Var l = vlog(offset(vabs(b), 1.0));
            return mean(add(add(t, s), add(e, l)));
        };
        REQUIRE(gradcheck(f, {a, b}) < 1e-6);
    }
    SECTION("clamp passes gradient inside range only") {
        Var c = Var::leaf(Tensor::from({4}, {-2.0, -0.5, 0.5, 2.0}));
        auto f = [&] { return sum(clamp(c, -1.0, 1.0)); };
        c.set_requires_grad(true);
        Var loss = f();
        backward(loss);
        REQUIRE(c.grad()[0] == 0.0);
        REQUIRE(c.grad()[1] == 1.0);
        REQUIRE(c.grad()[2] == 1.0);
        REQUIRE(c.grad()[3] == 0.0);
    }
    SECTION("per-sample reductions") {
        auto f = [&] { return sum(mul(per_sample_mean(a), per_sample_sum(b))); };
        REQUIRE(gradcheck(f, {a, b}) < 1e-7);
    }
}

TEST_CASE("shape ops gradients") {
    RngStream rng(13);
    Var a = Var::leaf(random_tensor({2, 6}, rng.derive(0)));
    Var b = Var::leaf(random_tensor({3, 6}, rng.derive(1)));
    Var c = Var::leaf(random_tensor({2, 2}, rng.derive(2)));

    auto f = [&] {
        Var stacked = concat_rows({a, b});                    // [5,6]
        Var sel = select_rows(stacked, {0, 4, 2, 0});         // [4,6]
        Var wide = concat_cols({select_rows(c, {0, 1, 0, 1}), sel});
        return mean(mul(wide, wide));
    };
    REQUIRE(gradcheck(f, {a, b, c}) < 1e-6);
}

TEST_CASE("matmul / linear gradients") {
    RngStream rng(17);
    Var x = Var::leaf(random_tensor({4, 3}, rng.derive(0)));
    Var w = Var::leaf(random_tensor({5, 3}, rng.derive(1)));
    Var bias = Var::leaf(random_tensor({5}, rng.derive(2)));
    auto f = [&] { return mean(vtanh(linear(x, w, bias))); };
    REQUIRE(gradcheck(f, {x, w, bias}) < 1e-6);

    Var m1 = Var::leaf(random_tensor({3, 4}, rng.derive(3)));
    Var m2 = Var::leaf(random_tensor({4, 2}, rng.derive(4)));
    auto g = [&] { return sum(matmul(m1, m2)); };
    REQUIRE(gradcheck(g, {m1, m2}) < 1e-7);
}

TEST_CASE("cross entropy with smoothing: value and gradient") {
    // uniform logits -> ln C regardless of smoothing
    Var logits = Var::leaf(Tensor({2, 5}));
    Var ce = cross_entropy_rows(logits, {1, 3}, 0.1);
    REQUIRE(ce.value()[0] == Catch::Approx(std::log(5.0)).epsilon(1e-12));
    REQUIRE(ce.value()[1] == Catch::Approx(std::log(5.0)).epsilon(1e-12));

    RngStream rng(19);
    Var l2 = Var::leaf(random_tensor({3, 4}, rng));
    auto f = [&] { return sum(cross_entropy_rows(l2, {0, 2, 3}, 0.1)); };
    REQUIRE(gradcheck(f, {l2}) < 1e-6);
}

TEST_CASE("standardize_cols gradient") {
    RngStream rng(23);
    Var x = Var::leaf(random_tensor({4, 3}, rng.derive(0)));
    Tensor mu = random_tensor({3}, rng.derive(1), 0.5);
    Tensor sd = Tensor::from({3}, {0.7, 1.3, 2.0});
    auto f = [&] { return mean(mul(standardize_cols(x, mu, sd), standardize_cols(x, mu, sd))); };
    REQUIRE(gradcheck(f, {x}) < 1e-6);
}

TEST_CASE("conv2d forward shape and gradient") {
    RngStream rng(29);
    Var x = Var::leaf(random_tensor({2, 3, 6, 4}, rng.derive(0)));
    Var w = Var::leaf(random_tensor({5, 3, 3, 3}, rng.derive(1), 0.5));
    Var b = Var::leaf(random_tensor({5}, rng.derive(2)));
    Var y = conv2d(x, w, b, 2, 1);
    REQUIRE(y.value().shape() == std::vector<int>{2, 5, 3, 2});

    auto f = [&] { return mean(vtanh(conv2d(x, w, b, 2, 1))); };
    REQUIRE(gradcheck(f, {x, w, b}) < 1e-5);
}

TEST_CASE("conv_transpose2d doubles spatial dims and matches finite differences") {
    RngStream rng(31);
    Var x = Var::leaf(random_tensor({2, 4, 3, 2}, rng.derive(0)));
    Var w = Var::leaf(random_tensor({4, 3, 4, 4}, rng.derive(1), 0.3));
    Var b = Var::leaf(random_tensor({3}, rng.derive(2)));
    Var y = conv_transpose2d(x, w, b, 2, 1);
    REQUIRE(y.value().shape() == std::vector<int>{2, 3, 6, 4});

    auto f = [&] { return mean(vsigmoid(conv_transpose2d(x, w, b, 2, 1))); };
    REQUIRE(gradcheck(f, {x, w, b}) < 1e-5);
}

TEST_CASE("max_pool_region picks the max and routes gradient") {
    Var x = Var::leaf(Tensor::from({1, 1, 4, 2}, {1, 2, 9, 3, 4, 5, 6, 7}));
    Var top = max_pool_region(x, 0, 2);
    Var bottom = max_pool_region(x, 2, 4);
    REQUIRE(top.value()[0] == 9.0);
    REQUIRE(bottom.value()[0] == 7.0);

    RngStream rng(37);
    Var r = Var::leaf(random_tensor({2, 3, 4, 3}, rng));
    auto f = [&] { return sum(add(max_pool_region(r, 0, 2), max_pool_region(r, 2, 4))); };
    REQUIRE(gradcheck(f, {r}) < 1e-6);
}

TEST_CASE("batch norm training gradient and running stats") {
    RngStream rng(41);
    Var x = Var::leaf(random_tensor({3, 2, 4, 2}, rng.derive(0)));
    Var gamma = Var::leaf(Tensor({2}, 1.2));
    Var beta = Var::leaf(Tensor({2}, -0.1));
    Tensor rm({2}), rv({2}, 1.0);

    auto f = [&] {
        Tensor rm2 = rm, rv2 = rv;  // keep buffers stable across FD calls
        return mean(vtanh(batch_norm2d(x, gamma, beta, rm2, rv2, true)));
    };
    REQUIRE(gradcheck(f, {x, gamma, beta}) < 1e-5);

    // eval mode uses running buffers
    batch_norm2d(x, gamma, beta, rm, rv, true);
    Var e1 = batch_norm2d(x, gamma, beta, rm, rv, false);
    Var e2 = batch_norm2d(x, gamma, beta, rm, rv, false);
    REQUIRE(bit_equal(e1.value(), e2.value()));
}

TEST_CASE("instance norm gradient and per-instance decoupling") {
    RngStream rng(43);
    Var x = Var::leaf(random_tensor({2, 2, 3, 3}, rng));
    auto f = [&] { return mean(vtanh(instance_norm2d(x))); };
    REQUIRE(gradcheck(f, {x}) < 1e-5);

    // output for sample 0 does not depend on sample 1
    Tensor orig = instance_norm2d(x).value();
    x.value()[x.value().idx4(1, 0, 0, 0)] += 3.0;
    Tensor mod = instance_norm2d(x).value();
    for (int c = 0; c < 2; ++c)
        for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 3; ++w)
                REQUIRE(orig[orig.idx4(0, c, h, w)] == mod[mod.idx4(0, c, h, w)]);
}

TEST_CASE("dropout: eval identity, train mask, gradient through fixed mask") {
    RngStream rng(47);
    Var x = Var::leaf(random_tensor({2, 10}, rng.derive(0)));
    RngStream r1 = rng.derive(1);
    Var eval_out = dropout(x, 0.5, false, r1);
    REQUIRE(bit_equal(eval_out.value(), x.value()));

    auto f = [&] {
        RngStream r = rng.derive(2);  // same mask every call
        return sum(dropout(x, 0.5, true, r));
    };
    REQUIRE(gradcheck(f, {x}) < 1e-7);
}

TEST_CASE("backward handles reused subgraphs (diamond)") {
    Var x = Var::leaf(Tensor::from({1}, {2.0}), true);
    Var y = mul(x, x);     // x^2
    Var z = add(y, y);     // 2 x^2
    backward(sum(z));
    REQUIRE(x.grad()[0] == Catch::Approx(8.0));  // d/dx 2x^2 = 4x
}

TEST_CASE("blob serialization round-trips bit-exactly") {
    testutil::TempDir td("blob");
    RngStream rng(53);
    std::map<std::string, Tensor> blobs;
    blobs["a.weight"] = random_tensor({3, 4}, rng.derive(0), 3.7);
    blobs["b.bias"] = random_tensor({7}, rng.derive(1), 1e-9);
    blobs["scalar"] = Tensor::scalar(-0.123456789012345678);
    std::string meta = "{\"stage\":2,\"epoch\":5}";
    std::string path = td.str() + "/x.ckpt";
    blobio::write_file(path, meta, blobs);
    auto f = blobio::read_file(path);
    REQUIRE(f.meta_json == meta);
    REQUIRE(f.blobs.size() == 3);
    for (const auto& [k, v] : blobs) REQUIRE(bit_equal(f.blobs.at(k), v));

    REQUIRE_THROWS(blobio::read_file(td.str() + "/missing.ckpt"));
}

TEST_CASE("adam and sgd reduce a quadratic") {
    Var p = Var::leaf(Tensor::from({2}, {5.0, -3.0}), true);
    std::vector<NamedParam> params{{"p", &p}};
    Adam opt(params);
    for (int i = 0; i < 300; ++i) {
        opt.zero_grad();
        Var loss = sum(mul(p, p));
        backward(loss);
        opt.step(0.05);
    }
    REQUIRE(std::abs(p.value()[0]) < 1e-2);
    REQUIRE(std::abs(p.value()[1]) < 1e-2);

    Var q = Var::leaf(Tensor::from({1}, {4.0}), true);
    std::vector<NamedParam> qp{{"q", &q}};
    SgdMomentum sgd(qp, 0.9);
    for (int i = 0; i < 200; ++i) {
        sgd.zero_grad();
        Var loss = mul(q, q);
        backward(sum(loss));
        sgd.step(0.02);
    }
    REQUIRE(std::abs(q.value()[0]) < 1e-3);
}

TEST_CASE("optimizer state export/import is exact") {
    RngStream rng(59);
    Var p = Var::leaf(random_tensor({3}, rng), true);
    std::vector<NamedParam> params{{"p", &p}};
    Adam a(params);
    for (int i = 0; i < 5; ++i) {
        a.zero_grad();
        backward(sum(mul(p, p)));
        a.step(0.1);
    }
    std::map<std::string, Tensor> st;
    a.export_state("adam", st);
    Tensor snapshot = p.value();

    Adam b(params);
    b.import_state("adam", st);
    // one more step from each must agree bit-exactly
    a.zero_grad();
    backward(sum(mul(p, p)));
    Tensor grad_snapshot = p.grad();
    a.step(0.1);
    Tensor after_a = p.value();

    p.value() = snapshot;
    p.clear_grad();
    p.raw()->accumulate(grad_snapshot);
    b.step(0.1);
    REQUIRE(bit_equal(after_a, p.value()));
}
