#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "popsan/network.hpp"

using namespace popsan;

namespace {

NetworkSpec small_spec() {
    NetworkSpec spec;
    spec.obs_dim = 2;
    spec.act_dim = 2;
    spec.pop_in = 3;
    spec.pop_out = 3;
    spec.obs_low = {-1, -1};
    spec.obs_high = {1, 1};
    spec.stages = {{3, {5}, 0.2}, {2, {5}, 0.2}, {1, {5}, 0.6}};
    spec.seed = 42;
    return spec;
}

// Scalar re-simulation of the whole eval path, consuming the same random
// stream the production forward does (draw order: per timestep, dimension-
// major over encoder neurons).
Vec reference_eval_forward(const PopSanActor& net, const Vec& obs, RngStream& rng) {
    const NetworkSpec& spec = net.spec;
    const int pop = spec.pop_in;

    // Receptive fields.
    Mat act(spec.obs_dim, pop);
    for (int i = 0; i < spec.obs_dim; ++i)
        for (int j = 0; j < pop; ++j) {
            const double d = obs[i] - net.coder.mu(i, j);
            const double sd = net.coder.sigma(i, j);
            act(i, j) = std::exp(-d * d / (2 * sd * sd));
        }

    // Spike sampling in the documented order.
    const int t1 = spec.stages[0].timesteps;
    Mat x(t1, spec.obs_dim * pop);
    for (int t = 0; t < t1; ++t)
        for (int i = 0; i < spec.obs_dim; ++i)
            for (int j = 0; j < pop; ++j)
                x(t, i * pop + j) = rng.uniform01() < act(i, j) ? 1.0 : 0.0;

    auto lif_sim = [](const Mat& in, const LIFParams& p) {
        Mat out(in.rows, p.n_out());
        std::vector<double> c(p.n_out(), 0.0), v(p.n_out(), p.v_rest), o(p.n_out(), 0.0);
        for (int t = 0; t < in.rows; ++t)
            for (int j = 0; j < p.n_out(); ++j) {
                double drive = 0;
                for (int i = 0; i < p.n_in(); ++i) drive += p.w(j, i) * in(t, i);
                c[j] = p.d_c * c[j] + drive + p.b[j];
                double vv = p.d_v * v[j] * (1 - o[j]) + c[j];
                if (vv > p.v_th) {
                    out(t, j) = 1;
                    v[j] = p.v_rest;
                } else {
                    out(t, j) = 0;
                    v[j] = vv;
                }
                o[j] = out(t, j);
            }
        return out;
    };

    for (int s = 0; s < spec.num_stages(); ++s) {
        for (const LIFParams& layer : net.stage_layers[s]) x = lif_sim(x, layer);
        if (s + 1 < spec.num_stages()) {
            const ShrinkLayer& sh = net.shrinks[s];
            Vec m(x.rows, 0.0);
            for (int t = 0; t < x.rows; ++t) {
                for (int p = 0; p < x.cols; ++p) m[t] += x(t, p);
                m[t] /= x.cols;
            }
            Mat alloc(sh.t_next(), sh.t_prev());
            for (int t1c = 0; t1c < sh.t_prev(); ++t1c) {
                double denom = 0;
                for (int t2 = 0; t2 < sh.t_next(); ++t2)
                    denom += std::exp(sh.w(t2, t1c) * m[t1c]);
                for (int t2 = 0; t2 < sh.t_next(); ++t2)
                    alloc(t2, t1c) = std::exp(sh.w(t2, t1c) * m[t1c]) / denom;
            }
            Mat nx(sh.t_next(), x.cols);
            for (int t2 = 0; t2 < sh.t_next(); ++t2)
                for (int p = 0; p < x.cols; ++p)
                    for (int t1c = 0; t1c < sh.t_prev(); ++t1c)
                        nx(t2, p) += alloc(t2, t1c) * x(t1c, p);
            x = nx;
        }
    }

    const Head& head = net.heads.back();
    Mat spikes = lif_sim(x, head.lif);
    Vec fr(spikes.cols, 0.0);
    for (int t = 0; t < spikes.rows; ++t)
        for (int j = 0; j < spikes.cols; ++j) fr[j] += spikes(t, j);
    for (double& f : fr) f /= spikes.rows;
    Vec a(spec.act_dim);
    for (int i = 0; i < spec.act_dim; ++i) {
        a[i] = head.decoder.b[i];
        for (int j = 0; j < spec.pop_out; ++j)
            a[i] += head.decoder.w(i, j) * fr[i * spec.pop_out + j];
    }
    return a;
}

}  // namespace

TEST_CASE("spec validation") {
    NetworkSpec bad = small_spec();
    bad.stages[1].timesteps = 3;  // not strictly decreasing
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = small_spec();
    bad.stages[0].loss_weight = 0.5;  // weights no longer sum to 1
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = small_spec();
    bad.stages.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(small_spec().param_count() > 0);
}

TEST_CASE("zero weights propagate only biases") {
    NetworkSpec spec = small_spec();
    PopSanActor net(spec);
    for (auto& stage : net.stage_layers)
        for (auto& layer : stage) {
            layer.w.fill(0.0);
            std::fill(layer.b.begin(), layer.b.end(), 0.0);
        }
    for (Head& h : net.heads) {
        h.lif.w.fill(0.0);
        std::fill(h.lif.b.begin(), h.lif.b.end(), 0.0);
        h.decoder.w.fill(0.0);
        h.decoder.b = {0.25, -0.5};
    }
    RngStream rng(3, 0);
    ActorForward out = net.forward({0.1, -0.2}, Mode::Train, rng);
    CHECK(out.action[0] == 0.25);
    CHECK(out.action[1] == -0.5);
    REQUIRE(out.aux_actions.size() == 2);
    for (const Vec& aux : out.aux_actions) {
        CHECK(aux[0] == 0.25);
        CHECK(aux[1] == -0.5);
    }
}

TEST_CASE("all-ones final train decodes to row sums plus bias") {
    NetworkSpec spec = small_spec();
    PopSanActor net(spec);
    // Saturate the final head: huge bias guarantees a spike each timestep.
    std::fill(net.heads.back().lif.b.begin(), net.heads.back().lif.b.end(), 10.0);
    RngStream rng(4, 0);
    ActorForward out = net.forward({0.3, 0.4}, Mode::Eval, rng);
    for (int i = 0; i < spec.act_dim; ++i) {
        double expect = net.heads.back().decoder.b[i];
        for (int j = 0; j < spec.pop_out; ++j) expect += net.heads.back().decoder.w(i, j);
        CHECK(out.action[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("determinism and independent re-simulation agree") {
    NetworkSpec spec;
    spec.obs_dim = 6;
    spec.act_dim = 2;
    spec.pop_in = 10;
    spec.pop_out = 10;
    spec.obs_low = {-2, -2, -1, -1, -3, -3};
    spec.obs_high = {2, 2, 1, 1, 3, 3};
    spec.stages = {{3, {32}, 0.2}, {2, {32}, 0.2}, {1, {32}, 0.6}};
    spec.seed = 11;
    PopSanActor net(spec);
    Vec obs{0.4, -1.0, 0.6, -0.2, -0.2, -0.8};

    RngStream r1(9, 5), r2(9, 5), r3(9, 5);
    ActorForward a = net.forward(obs, Mode::Eval, r1);
    ActorForward b = net.forward(obs, Mode::Eval, r2);
    CHECK(a.action == b.action);

    Vec ref = reference_eval_forward(net, obs, r3);
    REQUIRE(ref.size() == a.action.size());
    for (size_t k = 0; k < ref.size(); ++k) CHECK(a.action[k] == ref[k]);
}

TEST_CASE("decoder gradients are the exact linear-layer chain rule") {
    RngStream rng(5, 0);
    Decoder dec;
    dec.w = Mat(2, 3);
    for (double& v : dec.w.a) v = rng.uniform(-1, 1);
    dec.b = {0.1, -0.2};
    Vec fr{0.2, 0.4, 0.6, 0.8, 1.0, 0.0};

    Vec zero{0.0, 0.0};
    DecoderGrads g0 = decoder_backward(dec, zero, fr);
    for (double v : g0.d_w.a) CHECK(v == 0.0);
    for (double v : g0.d_b) CHECK(v == 0.0);
    for (double v : g0.d_fr) CHECK(v == 0.0);

    Vec fr0(6, 0.0);
    Vec dl{0.3, -0.7};
    DecoderGrads g1 = decoder_backward(dec, dl, fr0);
    for (double v : g1.d_w.a) CHECK(v == 0.0);
    CHECK(g1.d_b[0] == 0.3);
    CHECK(g1.d_b[1] == -0.7);

    // Finite differences of a linear map are exact up to roundoff.
    auto loss = [&]() {
        Vec a = decode_rates(dec, fr);
        return 0.3 * a[0] - 0.7 * a[1];
    };
    DecoderGrads g = decoder_backward(dec, dl, fr);
    const double h = 1e-6;
    for (size_t k = 0; k < dec.w.a.size(); ++k) {
        double& x = dec.w.a[k];
        const double orig = x;
        x = orig + h;
        const double up = loss();
        x = orig - h;
        const double down = loss();
        x = orig;
        CHECK(g.d_w.a[k] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("output population blocks are disjoint") {
    NetworkSpec spec = small_spec();
    PopSanActor net(spec);
    RngStream r1(8, 2), r2(8, 2);
    ActorForward before = net.forward({0.5, -0.5}, Mode::Eval, r1);
    net.heads.back().decoder.w(0, 1) += 3.0;  // perturb action dim 0 only
    ActorForward after = net.forward({0.5, -0.5}, Mode::Eval, r2);
    CHECK(before.action[1] == after.action[1]);
}

TEST_CASE("eval mode never reads auxiliary-head parameters") {
    NetworkSpec spec = small_spec();
    PopSanActor net(spec);
    RngStream r1(6, 1), r2(6, 1);
    ActorForward before = net.forward({0.2, 0.9}, Mode::Eval, r1);
    CHECK(before.aux_actions.empty());
    // Poison every auxiliary parameter; eval output must be bit-identical.
    for (size_t i = 0; i + 1 < net.heads.size(); ++i) {
        net.heads[i].lif.w.fill(std::nan(""));
        std::fill(net.heads[i].lif.b.begin(), net.heads[i].lif.b.end(), std::nan(""));
        net.heads[i].decoder.w.fill(std::nan(""));
        std::fill(net.heads[i].decoder.b.begin(), net.heads[i].decoder.b.end(), std::nan(""));
    }
    ActorForward after = net.forward({0.2, 0.9}, Mode::Eval, r2);
    CHECK(before.action == after.action);
}

TEST_CASE("backward trivial cases") {
    NetworkSpec spec = small_spec();
    spec.stages[0].loss_weight = 0.0;
    spec.stages[1].loss_weight = 0.0;
    spec.stages[2].loss_weight = 1.0;
    PopSanActor net(spec);
    RngStream rng(2, 3);
    ActorTrace trace;
    net.forward({0.7, 0.1}, Mode::Train, rng, &trace);

    // All weight on the final stage: auxiliary parameters receive nothing.
    ActorGrads g = net.zero_grads();
    net.backward(trace, {1.0, -2.0}, {Vec{5.0, 5.0}, Vec{5.0, 5.0}}, {}, g, true);
    for (size_t i = 0; i + 1 < g.d_heads.size(); ++i) {
        for (double v : g.d_heads[i].d_lif_w.a) CHECK(v == 0.0);
        for (double v : g.d_heads[i].d_dec_w.a) CHECK(v == 0.0);
        for (double v : g.d_heads[i].d_dec_b) CHECK(v == 0.0);
    }

    // Zero action gradients everywhere give zero parameter gradients.
    ActorGrads gz = net.zero_grads();
    net.backward(trace, {0.0, 0.0}, {Vec{0.0, 0.0}, Vec{0.0, 0.0}}, {}, gz, true);
    std::vector<TensorRef> refs = PopSanActor::grad_refs(gz, net);
    for (const TensorRef& r : refs)
        for (size_t k = 0; k < r.n; ++k) CHECK(r.data[k] == 0.0);
}

TEST_CASE("backward requires a train trace and matching shapes") {
    NetworkSpec spec = small_spec();
    PopSanActor net(spec);
    RngStream rng(1, 0);
    ActorTrace eval_trace;
    net.forward({0.0, 0.0}, Mode::Eval, rng, &eval_trace);
    ActorGrads g = net.zero_grads();
    CHECK_THROWS_AS(
        net.backward(eval_trace, {0.0, 0.0}, {Vec{0, 0}, Vec{0, 0}}, {}, g, true),
        std::invalid_argument);

    ActorTrace train_trace;
    net.forward({0.0, 0.0}, Mode::Train, rng, &train_trace);
    CHECK_THROWS_AS(net.backward(train_trace, {0.0, 0.0}, {}, {}, g, true),
                    std::invalid_argument);
}

TEST_CASE("parameter and gradient enumerations stay congruent") {
    NetworkSpec spec = small_spec();
    PopSanActor net(spec);
    ActorGrads g = net.zero_grads();
    std::vector<TensorRef> p = net.param_refs();
    std::vector<TensorRef> gr = PopSanActor::grad_refs(g, net);
    REQUIRE(p.size() == gr.size());
    size_t total = 0;
    for (size_t k = 0; k < p.size(); ++k) {
        CHECK(p[k].name == gr[k].name);
        CHECK(p[k].n == gr[k].n);
        total += p[k].n;
    }
    CHECK(total == net.num_params());
    CHECK(total == spec.param_count());
}
