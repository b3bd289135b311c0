#include "popsan/energy.hpp"

#include <cmath>

#include "popsan/csv.hpp"

namespace popsan {

double MeasuredRates::mean() const {
    double sum = 0;
    long n = 0;
    for (double r : layer_input_rates) {
        sum += r;
        ++n;
    }
    for (double r : shrink_input_rates) {
        sum += r;
        ++n;
    }
    return n ? sum / n : 0.0;
}

double estimate_energy(const OpCount& counts, const EnergyModel& model) {
    require(counts.mac_ops >= 0 && counts.ac_ops >= 0, "operation counts must be nonnegative");
    require(model.e_mac > 0 && model.e_ac > 0, "per-op energies must be positive");
    return model.e_mac * counts.mac_ops + model.e_ac * counts.ac_ops;
}

namespace {

double nnz(const Mat& m) {
    double c = 0;
    for (double v : m.a)
        if (v != 0.0) c += 1;
    return c;
}

}  // namespace

OpCount count_ops(const PopSanActor& net, const std::vector<Vec>& observations,
                  RngStream& rng, Mode mode) {
    require(mode == Mode::Eval, "operation counting requires an eval-mode network");
    require(!observations.empty(), "need at least one observation");

    const NetworkSpec& spec = net.spec;
    const int num_stages = spec.num_stages();

    OpCount total;
    std::vector<LayerOps> layers;
    for (const std::string& name : net.lif_layer_names(Mode::Eval))
        layers.push_back({name, 0, 0});
    std::vector<double> layer_in_entries(layers.size(), 0.0);   // nnz of inputs
    std::vector<double> layer_in_capacity(layers.size(), 0.0);  // T * n_in
    std::vector<double> shrink_entries(net.shrinks.size(), 0.0);
    std::vector<double> shrink_capacity(net.shrinks.size(), 0.0);

    for (const Vec& obs : observations) {
        ActorTrace trace;
        net.forward(obs, Mode::Eval, rng, &trace);

        double inf_mac = 0, inf_ac = 0;
        int layer_idx = 0;

        // Receptive-field evaluations: one MAC-equivalent each.
        inf_mac += static_cast<double>(spec.obs_dim) * spec.pop_in;

        for (int i = 0; i < num_stages; ++i) {
            for (size_t l = 0; l < net.stage_layers[i].size(); ++l) {
                const LIFTrace& lt = trace.stages[i].layers[l];
                const LIFParams& p = net.stage_layers[i][l];
                const bool first_layer = (i == 0 && l == 0);
                LayerOps& ops = layers[layer_idx];
                layer_in_entries[layer_idx] += nnz(lt.inputs);
                layer_in_capacity[layer_idx] += static_cast<double>(lt.inputs.rows) *
                                                lt.inputs.cols;
                if (first_layer) {
                    const double dense =
                        static_cast<double>(lt.inputs.rows) * p.n_in() * p.n_out();
                    ops.mac += dense;
                    inf_mac += dense;
                } else {
                    const double work = nnz(lt.inputs) * p.n_out();
                    ops.ac += work;
                    inf_ac += work;
                }
                total.timesteps += lt.inputs.rows;
                ++layer_idx;
            }
            if (i + 1 < num_stages) {
                const Mat& stage_out = trace.stages[i].layers.back().spikes;
                const double t_prev = net.shrinks[i].t_prev();
                const double t_next = net.shrinks[i].t_next();
                const double work = t_prev * t_next + nnz(stage_out) * t_next;
                total.shrink_ac += work;
                inf_ac += work;
                shrink_entries[i] += nnz(stage_out);
                shrink_capacity[i] += static_cast<double>(stage_out.rows) * stage_out.cols;
            }
        }

        // Final head: its LIF layer is AC work, the decoder readout is MAC.
        const HeadTrace& ht = trace.heads.back();
        LayerOps& head_ops = layers[layer_idx];
        layer_in_entries[layer_idx] += nnz(ht.lif_trace.inputs);
        layer_in_capacity[layer_idx] += static_cast<double>(ht.lif_trace.inputs.rows) *
                                        ht.lif_trace.inputs.cols;
        const double head_work = nnz(ht.lif_trace.inputs) * net.heads.back().lif.n_out();
        head_ops.ac += head_work;
        inf_ac += head_work;
        total.timesteps += ht.lif_trace.inputs.rows;
        inf_mac += static_cast<double>(spec.act_dim) * spec.pop_out;

        total.mac_ops += inf_mac;
        total.ac_ops += inf_ac;
        total.per_inference_ops.push_back(inf_mac + inf_ac);
        ++total.inferences;
    }

    total.layers = std::move(layers);
    total.rates.layer_input_rates.resize(layer_in_entries.size());
    for (size_t k = 0; k < layer_in_entries.size(); ++k)
        total.rates.layer_input_rates[k] =
            layer_in_capacity[k] > 0 ? layer_in_entries[k] / layer_in_capacity[k] : 0.0;
    total.rates.shrink_input_rates.resize(shrink_entries.size());
    for (size_t k = 0; k < shrink_entries.size(); ++k)
        total.rates.shrink_input_rates[k] =
            shrink_capacity[k] > 0 ? shrink_entries[k] / shrink_capacity[k] : 0.0;
    return total;
}

SavingsReport compare_with_ann(const NetworkSpec& base_spec, const MeasuredRates& rates,
                               const std::vector<int>& t_finals, const EnergyModel& model) {
    base_spec.validate();
    const int num_stages = base_spec.num_stages();

    // Layer shapes along the eval path: stage layers then the final head.
    struct Shape {
        int n_in, n_out, stage;
    };
    std::vector<Shape> shapes;
    int width = base_spec.obs_dim * base_spec.pop_in;
    for (int i = 0; i < num_stages; ++i)
        for (int h : base_spec.stages[i].hidden) {
            shapes.push_back({width, h, i});
            width = h;
        }
    shapes.push_back({width, base_spec.act_dim * base_spec.pop_out, num_stages - 1});
    require(rates.layer_input_rates.size() == shapes.size(),
            "need one measured rate per eval-path layer");
    require(static_cast<int>(rates.shrink_input_rates.size()) == num_stages - 1,
            "need one measured rate per shrink layer");

    // Dense baseline: same shapes, one pass, every op a MAC.
    double ann_mac = static_cast<double>(base_spec.obs_dim) * base_spec.pop_in;
    for (const Shape& s : shapes) ann_mac += static_cast<double>(s.n_in) * s.n_out;
    ann_mac += static_cast<double>(base_spec.act_dim) * base_spec.pop_out;
    const double ann_pj = model.e_mac * ann_mac;

    SavingsReport report;
    for (int t_final : t_finals) {
        require(t_final >= 1, "final-stage timestep count must be >= 1");
        // Stage timesteps decrease by 1 per stage and end at t_final.
        std::vector<int> stage_t(num_stages);
        for (int i = 0; i < num_stages; ++i) stage_t[i] = t_final + (num_stages - 1 - i);

        double mac = static_cast<double>(base_spec.obs_dim) * base_spec.pop_in +
                     static_cast<double>(base_spec.act_dim) * base_spec.pop_out;
        double ac = 0;
        for (size_t k = 0; k < shapes.size(); ++k) {
            const Shape& s = shapes[k];
            const double t = stage_t[s.stage];
            if (k == 0) {
                mac += t * static_cast<double>(s.n_in) * s.n_out;
            } else {
                ac += t * rates.layer_input_rates[k] * s.n_in * s.n_out;
            }
        }
        for (int i = 0; i + 1 < num_stages; ++i) {
            const double t_prev = stage_t[i];
            const double t_next = stage_t[i + 1];
            const int n = base_spec.stages[i].hidden.back();
            ac += t_prev * t_next + rates.shrink_input_rates[i] * n * t_prev * t_next;
        }

        SavingsRow row;
        row.t_final = t_final;
        row.mac_ops = mac;
        row.ac_ops = ac;
        row.ann_pj = ann_pj;
        row.snn_pj = model.e_mac * mac + model.e_ac * ac;
        row.savings_pct = 100.0 * (1.0 - row.snn_pj / ann_pj);
        row.spike_rate_mean = rates.mean();
        report.rows.push_back(row);
    }
    return report;
}

void SavingsReport::write_csv(const std::string& path) const {
    CsvWriter csv(path, {"t_final", "ann_pj", "snn_pj", "savings_pct", "mac_ops", "ac_ops",
                         "spike_rate_mean"});
    for (const SavingsRow& r : rows)
        csv.row({static_cast<double>(r.t_final), r.ann_pj, r.snn_pj, r.savings_pct, r.mac_ops,
                 r.ac_ops, r.spike_rate_mean});
}

}  // namespace popsan
