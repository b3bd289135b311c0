#include "popsan/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "popsan/dense.hpp"
#include "popsan/ppo.hpp"

namespace popsan {

namespace {
constexpr double kStep = 1e-5;
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
    return std::fabs(analytic - numeric) / denom;
}

void GradCheckResult::absorb(double err, const std::string& name) {
    ++checks;
    if (err > worst_rel_err) {
        worst_rel_err = err;
        worst_name = name;
    }
}

namespace {

// Central difference of `loss` w.r.t. one scalar in place.
double central_diff(double* x, const std::function<double()>& loss) {
    const double orig = *x;
    *x = orig + kStep;
    const double up = loss();
    *x = orig - kStep;
    const double down = loss();
    *x = orig;
    return (up - down) / (2.0 * kStep);
}

void check_tensor(GradCheckResult& res, const std::string& name, double* data,
                  const double* analytic, size_t n, const std::function<double()>& loss) {
    for (size_t k = 0; k < n; ++k) {
        const double fd = central_diff(data + k, loss);
        res.absorb(relative_error(analytic[k], fd), name + "[" + std::to_string(k) + "]");
    }
}

Mat random_binary(int rows, int cols, double p, RngStream& rng) {
    Mat m(rows, cols);
    for (double& v : m.a) v = rng.bernoulli(p) ? 1.0 : 0.0;
    return m;
}

}  // namespace

GradCheckResult gradcheck_encoder(uint64_t seed) {
    RngStream rng(seed, 900);
    const int obs_dim = 2, pop = 3, timesteps = 4;
    PopulationCoder coder(obs_dim, pop, {-1.0, -2.0}, {1.0, 2.0});
    for (double& v : coder.mu.a) v += rng.uniform(-0.05, 0.05);
    Vec s{0.37, -0.81};

    // Frozen Bernoulli mask as the incoming spike gradient; the surrogate
    // loss replaces the sampled spikes by the activation itself.
    Mat mask = random_binary(timesteps, obs_dim * pop, 0.5, rng);
    auto loss = [&]() {
        Mat act = coder.compute_receptive_field(s);
        double l = 0;
        for (int t = 0; t < timesteps; ++t)
            for (int i = 0; i < obs_dim; ++i)
                for (int j = 0; j < pop; ++j) l += mask(t, i * pop + j) * act(i, j);
        return l;
    };

    Mat act = coder.compute_receptive_field(s);
    EncoderGrads g = coder.backward(mask, act, s);

    GradCheckResult res;
    check_tensor(res, "encoder.mu", coder.mu.a.data(), g.d_mu.a.data(), coder.mu.a.size(), loss);
    check_tensor(res, "encoder.sigma", coder.sigma.a.data(), g.d_sigma.a.data(),
                 coder.sigma.a.size(), loss);
    return res;
}

GradCheckResult gradcheck_lif(uint64_t seed) {
    GradCheckResult res;
    struct Case {
        int n_in, n_out, timesteps;
    };
    for (const Case& c : {Case{1, 1, 3}, Case{2, 3, 4}, Case{4, 4, 4}}) {
        RngStream rng(seed, 910 + c.n_in * 10 + c.n_out);
        LIFParams p;
        p.w = Mat(c.n_out, c.n_in);
        for (double& v : p.w.a) v = rng.uniform(-0.8, 0.8);
        p.b.assign(c.n_out, 0.0);
        for (double& v : p.b) v = rng.uniform(-0.1, 0.1);
        Mat x = random_binary(c.timesteps, c.n_in, 0.6, rng);

        // Gates come from the real binary forward at the base parameters.
        Mat gates = lif_forward(x, p).second.spikes;

        auto loss = [&]() {
            auto [out, trace] = lif_forward_surrogate(x, p, gates);
            double l = 0;
            for (double v : out.a) l += v * v;
            return l;
        };

        auto [out, trace] = lif_forward_surrogate(x, p, gates);
        Mat dl_dout(out.rows, out.cols);
        for (size_t k = 0; k < out.a.size(); ++k) dl_dout.a[k] = 2.0 * out.a[k];
        LIFGrads g = lif_backward(dl_dout, trace, p);

        const std::string tag =
            "lif[" + std::to_string(c.n_in) + "x" + std::to_string(c.n_out) + "]";
        check_tensor(res, tag + ".w", p.w.a.data(), g.d_w.a.data(), p.w.a.size(), loss);
        check_tensor(res, tag + ".b", p.b.data(), g.d_b.data(), p.b.size(), loss);
        check_tensor(res, tag + ".x", x.a.data(), g.d_x.a.data(), x.a.size(), loss);
    }
    return res;
}

GradCheckResult gradcheck_shrink(uint64_t seed) {
    GradCheckResult res;
    RngStream rng(seed, 920);
    for (int rep = 0; rep < 2; ++rep) {
        const int t_prev = rep == 0 ? 3 : 4;
        const int t_next = 2;
        const int n = 3;
        ShrinkLayer layer(t_prev, t_next);
        for (double& v : layer.w.a) v = rng.uniform(-0.7, 0.7);
        Mat o = random_binary(t_prev, n, 0.5, rng);

        auto loss = [&]() {
            auto [out, cache] = layer.forward(o);
            double l = 0;
            for (double v : out.a) l += v * v;
            return l;
        };

        auto [out, cache] = layer.forward(o);
        Mat dl_dout(out.rows, out.cols);
        for (size_t k = 0; k < out.a.size(); ++k) dl_dout.a[k] = 2.0 * out.a[k];
        ShrinkGrads g = layer.backward(dl_dout, cache, true);

        const std::string tag = "shrink[" + std::to_string(t_prev) + "->2]";
        check_tensor(res, tag + ".w", layer.w.a.data(), g.d_w.a.data(), layer.w.a.size(), loss);
        check_tensor(res, tag + ".input", o.a.data(), g.d_input.a.data(), o.a.size(), loss);
    }
    return res;
}

GradCheckResult gradcheck_decoder(uint64_t seed) {
    RngStream rng(seed, 930);
    const int act_dim = 2, pop = 3;
    Decoder dec;
    dec.w = Mat(act_dim, pop);
    for (double& v : dec.w.a) v = rng.uniform(-1.0, 1.0);
    dec.b = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    Vec fr(act_dim * pop);
    for (double& v : fr) v = rng.uniform(0.0, 1.0);

    auto loss = [&]() {
        Vec a = decode_rates(dec, fr);
        double l = 0;
        for (double v : a) l += v * v;
        return l;
    };

    Vec a = decode_rates(dec, fr);
    Vec dl_da(a.size());
    for (size_t k = 0; k < a.size(); ++k) dl_da[k] = 2.0 * a[k];
    DecoderGrads g = decoder_backward(dec, dl_da, fr);

    GradCheckResult res;
    check_tensor(res, "decoder.w", dec.w.a.data(), g.d_w.a.data(), dec.w.a.size(), loss);
    check_tensor(res, "decoder.b", dec.b.data(), g.d_b.data(), dec.b.size(), loss);
    check_tensor(res, "decoder.fr", fr.data(), g.d_fr.data(), fr.size(), loss);
    return res;
}

GradCheckResult gradcheck_critic(uint64_t seed) {
    RngStream rng(seed, 940);
    DenseNet net(4, {6, 5}, 1, rng);
    Vec s{0.3, -0.7, 1.1, 0.2};

    auto loss = [&]() {
        const double v = net.forward(s)[0];
        return v * v;
    };

    DenseTrace trace;
    const double v = net.forward(s, &trace)[0];
    DenseGrads g = net.zero_grads();
    net.backward(trace, {2.0 * v}, g);

    GradCheckResult res;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const std::string tag = "critic.layer" + std::to_string(l + 1);
        check_tensor(res, tag + ".w", net.layers[l].w.a.data(), g.d_w[l].a.data(),
                     net.layers[l].w.a.size(), loss);
        check_tensor(res, tag + ".b", net.layers[l].b.data(), g.d_b[l].data(),
                     net.layers[l].b.size(), loss);
    }
    return res;
}

FrozenGates harvest_gates(const ActorTrace& trace) {
    FrozenGates gates;
    gates.stage_gates.resize(trace.stages.size());
    for (size_t i = 0; i < trace.stages.size(); ++i)
        for (const LIFTrace& lt : trace.stages[i].layers)
            gates.stage_gates[i].push_back(lt.spikes);
    for (const HeadTrace& ht : trace.heads) gates.head_gates.push_back(ht.lif_trace.spikes);
    return gates;
}

SurrogateOut actor_forward_surrogate(const PopSanActor& net, const Vec& obs,
                                     const FrozenGates& gates, ActorTrace* trace) {
    ActorTrace local;
    ActorTrace& tr = trace ? *trace : local;
    tr = ActorTrace{};
    tr.mode = Mode::Train;
    tr.observation = obs;
    tr.activation = net.coder.compute_receptive_field(obs);

    const int num_stages = net.num_stages();
    const int t1 = net.spec.stages[0].timesteps;
    const int n_in = net.coder.num_neurons();
    tr.input_spikes = Mat(t1, n_in);
    for (int t = 0; t < t1; ++t)
        for (int i = 0; i < net.coder.obs_dim(); ++i)
            for (int j = 0; j < net.coder.pop_size(); ++j)
                tr.input_spikes(t, i * net.coder.pop_size() + j) = tr.activation(i, j);

    tr.stages.resize(num_stages);
    tr.heads.resize(num_stages);

    auto run_head_smooth = [&](int i, const Mat& stage_out) {
        HeadTrace ht;
        auto [out, ltrace] = lif_forward_surrogate(stage_out, net.heads[i].lif,
                                                   gates.head_gates[i]);
        ht.lif_trace = std::move(ltrace);
        ht.firing_rates.assign(out.cols, 0.0);
        for (int t = 0; t < out.rows; ++t)
            for (int j = 0; j < out.cols; ++j) ht.firing_rates[j] += out(t, j);
        for (int j = 0; j < out.cols; ++j) ht.firing_rates[j] /= out.rows;
        ht.action = decode_rates(net.heads[i].decoder, ht.firing_rates);
        return ht;
    };

    SurrogateOut result;
    Mat x = tr.input_spikes;
    for (int i = 0; i < num_stages; ++i) {
        for (size_t l = 0; l < net.stage_layers[i].size(); ++l) {
            auto [out, ltrace] = lif_forward_surrogate(x, net.stage_layers[i][l],
                                                       gates.stage_gates[i][l]);
            x = std::move(out);
            tr.stages[i].layers.push_back(std::move(ltrace));
        }
        if (i == num_stages - 1) {
            tr.heads[i] = run_head_smooth(i, x);
            result.action = tr.heads[i].action;
        } else {
            tr.heads[i] = run_head_smooth(i, x);
            result.aux_actions.push_back(tr.heads[i].action);
            auto [shrunk, cache] = net.shrinks[i].forward(x);
            tr.stages[i].shrink = std::move(cache);
            x = std::move(shrunk);
        }
    }
    return result;
}

NetworkSpec tiny_gradcheck_spec() {
    NetworkSpec spec;
    spec.obs_dim = 1;
    spec.act_dim = 1;
    spec.pop_in = 2;
    spec.pop_out = 2;
    spec.obs_low = {-1.0};
    spec.obs_high = {1.0};
    spec.stages = {{2, {3}, 0.3}, {1, {3}, 0.7}};
    return spec;
}

GradCheckResult gradcheck_network(const NetworkSpec& spec, uint64_t seed) {
    PopSanActor net(spec);
    RngStream rng(seed, 950);
    // Nonzero shrink weights exercise the softmax Jacobian properly.
    for (ShrinkLayer& s : net.shrinks)
        for (double& v : s.w.a) v = rng.uniform(-0.5, 0.5);
    // Jitter the biases: with b = 0 a silent upstream layer parks voltages
    // exactly on the ramp kink at v_th - a/2, where the model itself is
    // one-sidedly differentiable and central differences are meaningless.
    for (auto& stage : net.stage_layers)
        for (LIFParams& layer : stage)
            for (double& b : layer.b) b += rng.uniform(-0.15, 0.15);
    for (Head& h : net.heads)
        for (double& b : h.lif.b) b += rng.uniform(-0.15, 0.15);

    Vec obs(spec.obs_dim);
    for (double& v : obs) v = rng.uniform(-0.9, 0.9);

    // Gates from the real forward at base parameters.
    RngStream gate_rng(seed, 951);
    ActorTrace ref_trace;
    net.forward(obs, Mode::Train, gate_rng, &ref_trace);
    FrozenGates gates = harvest_gates(ref_trace);

    const int num_heads = net.num_heads();
    auto loss = [&]() {
        SurrogateOut out = actor_forward_surrogate(net, obs, gates);
        double l = 0;
        const double lambda_final = spec.stages.back().loss_weight;
        for (double v : out.action) l += lambda_final * v * v;
        for (int i = 0; i + 1 < num_heads; ++i)
            for (double v : out.aux_actions[i]) l += spec.stages[i].loss_weight * v * v;
        return l;
    };

    ActorTrace trace;
    SurrogateOut out = actor_forward_surrogate(net, obs, gates, &trace);
    Vec dl_da(out.action.size());
    for (size_t k = 0; k < dl_da.size(); ++k) dl_da[k] = 2.0 * out.action[k];
    std::vector<Vec> dl_daux;
    for (int i = 0; i + 1 < num_heads; ++i) {
        Vec d(out.aux_actions[i].size());
        for (size_t k = 0; k < d.size(); ++k) d[k] = 2.0 * out.aux_actions[i][k];
        dl_daux.push_back(std::move(d));
    }
    ActorGrads grads = net.zero_grads();
    net.backward(trace, dl_da, dl_daux, {}, grads, true);

    GradCheckResult res;
    std::vector<TensorRef> params = net.param_refs();
    std::vector<TensorRef> grad_refs = PopSanActor::grad_refs(grads, net);
    for (size_t k = 0; k < params.size(); ++k) {
        if (params[k].name == "log_std") continue;  // not on the action path
        check_tensor(res, params[k].name, params[k].data, grad_refs[k].data, params[k].n, loss);
    }
    return res;
}

GradCheckSummary run_all_gradchecks(const NetworkSpec& end_to_end_spec, uint64_t seed) {
    GradCheckSummary summary;
    summary.suites.emplace_back("encoder", gradcheck_encoder(seed));
    summary.suites.emplace_back("lif", gradcheck_lif(seed));
    summary.suites.emplace_back("shrink", gradcheck_shrink(seed));
    summary.suites.emplace_back("decoder", gradcheck_decoder(seed));
    summary.suites.emplace_back("critic", gradcheck_critic(seed));
    summary.suites.emplace_back("network", gradcheck_network(end_to_end_spec, seed));
    for (const auto& [name, res] : summary.suites) {
        if (res.worst_rel_err > summary.worst_rel_err) {
            summary.worst_rel_err = res.worst_rel_err;
            summary.worst_name = name + "/" + res.worst_name;
        }
    }
    return summary;
}

}  // namespace popsan
