#include "otc/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace otc {

ViewPair make_views(const Matrix& features, Rng& rng, double weak_sigma, double strong_sigma,
                    double strong_mask_frac) {
    if (weak_sigma < 0.0 || strong_sigma < weak_sigma) {
        throw std::invalid_argument("make_views: need 0 <= weak_sigma <= strong_sigma");
    }
    if (strong_mask_frac < 0.0 || strong_mask_frac >= 1.0) {
        throw std::invalid_argument("make_views: strong_mask_frac must be in [0, 1)");
    }
    const std::size_t d = features.cols();
    ViewPair views;
    views.weak = features;
    for (double& x : views.weak.data()) x += weak_sigma * rng.gaussian();

    views.strong = features;
    for (double& x : views.strong.data()) x += strong_sigma * rng.gaussian();
    const std::size_t n_mask = static_cast<std::size_t>(std::floor(strong_mask_frac * d + 0.5));
    std::vector<std::size_t> coords(d);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto row = views.strong.row(i);
        if (n_mask > 0) {
            std::iota(coords.begin(), coords.end(), 0);
            for (std::size_t m = 0; m < n_mask; ++m) {
                std::swap(coords[m], coords[m + rng.index(d - m)]);
                row[coords[m]] = 0.0;
            }
        }
        const double n = l2_norm(row);
        if (n > 0.0) {
            for (double& x : row) x /= n;
        }
    }
    return views;
}

std::size_t PseudoLabelSet::kept_count() const {
    return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true));
}

PseudoLabelSet assign_pseudo_labels(const Matrix& probs_weak, const OtLabels& ot_labels,
                                    double tau1) {
    if (tau1 <= 0.0 || tau1 >= 1.0) throw std::invalid_argument("assign_pseudo_labels: tau1 in (0,1)");
    const std::size_t M = probs_weak.rows();
    if (ot_labels.labels.size() != M) {
        throw std::invalid_argument("assign_pseudo_labels: ot label count mismatch");
    }
    PseudoLabelSet set;
    set.labels.assign(M, -1);
    set.source.assign(M, PseudoSource::Model);
    set.kept.assign(M, false);
    for (std::size_t i = 0; i < M; ++i) {
        const auto row = probs_weak.row(i);
        const auto arg_it = std::max_element(row.begin(), row.end());
        if (*arg_it >= tau1) {
            set.labels[i] = static_cast<int>(arg_it - row.begin());
            set.source[i] = PseudoSource::Model;
            set.kept[i] = true;
        } else if (ot_labels.present[i]) {
            set.labels[i] = ot_labels.labels[i];
            set.source[i] = PseudoSource::Transport;
            set.kept[i] = true;
        }
    }
    return set;
}

double contrastive_loss(const Matrix& z_weak, const Matrix& z_strong, double temperature) {
    const std::size_t M = z_weak.rows();
    if (M != z_strong.rows() || z_weak.cols() != z_strong.cols()) {
        throw std::invalid_argument("contrastive_loss: shape mismatch");
    }
    if (M < 2) return 0.0;  // no negatives available

    // Stack weak then strong; positive of anchor a is a+M mod 2M.
    const std::size_t n = 2 * M;
    auto emb = [&](std::size_t a) {
        return a < M ? z_weak.row(a) : z_strong.row(a - M);
    };
    double loss = 0.0;
    std::vector<double> sims(n);
    for (std::size_t a = 0; a < n; ++a) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            sims[b] = dot(emb(a), emb(b)) / temperature;
            mx = std::max(mx, sims[b]);
        }
        double denom = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            denom += std::exp(sims[b] - mx);
        }
        const std::size_t pos = (a + M) % n;
        loss += -(sims[pos] - mx) + std::log(denom);
    }
    return loss / static_cast<double>(n);
}

double ssl_loss(const LinearModel& model, const Matrix& labeled_features,
                const std::vector<int>& labeled_targets, const Matrix& pseudo_features,
                const std::vector<int>& pseudo_targets) {
    return ce_loss(model, labeled_features, labeled_targets) +
           ce_loss(model, pseudo_features, pseudo_targets);
}

Gradient ssl_grad(const LinearModel& model, const Matrix& labeled_features,
                  const std::vector<int>& labeled_targets, const Matrix& pseudo_features,
                  const std::vector<int>& pseudo_targets) {
    Gradient g = ce_grad(model, labeled_features, labeled_targets);
    g.add_scaled(ce_grad(model, pseudo_features, pseudo_targets), 1.0);
    return g;
}

LossBreakdown total_loss(double l_ssl, double l_sw, double l_con, double lambda_sw,
                         double lambda_c) {
    if (!std::isfinite(l_ssl) || !std::isfinite(l_sw) || !std::isfinite(l_con)) {
        throw std::runtime_error("total_loss: non-finite component (l_ssl=" + std::to_string(l_ssl) +
                                 ", l_sw=" + std::to_string(l_sw) +
                                 ", l_con=" + std::to_string(l_con) + ")");
    }
    LossBreakdown b;
    b.l_ssl = l_ssl;
    b.l_sw = l_sw;
    b.l_con = l_con;
    b.lambda_sw = lambda_sw;
    b.lambda_c = lambda_c;
    b.l_total = l_ssl + lambda_sw * l_sw + lambda_c * l_con;
    return b;
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto r = src.row(idx[i]);
        std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config, const Dataset& train,
                            const Matrix& test_features, const std::vector<int>& test_labels,
                            const AblationToggles& toggles, bool dump_plans) {
    validate(config);
    validate(train);
    const int K = config.K;
    const Rng base(config.seed);

    PipelineResult result;
    result.model = zero_model(K, train.features.cols());

    Rng warmup_rng = base.substream("warmup");
    const WarmupTrace warm =
        train_warmup(result.model, train, config.warmup_epochs, config.lr, config.batch_size, warmup_rng);
    result.warmup_loss = warm.epoch_loss;
    result.warmup_test_accuracy = accuracy(result.model, test_features, test_labels);

    const Matrix norm_features = extract_features(train.features, FeatureMode::NormalizedIdentity);
    const std::vector<double> mu = uniform_marginal(K);

    ThresholdState thresholds;
    thresholds.lambda_ema = config.lambda_ema;
    SelectionResult sel;
    const SelectionOptions sel_opts{toggles.cdt, toggles.lcs};

    for (int round = 1; round <= config.ssl_rounds; ++round) {
        try {
            Rng round_rng = base.substream("round-" + std::to_string(round));

            if ((round - 1) % config.select_refresh_every == 0) {
                const Matrix probs = forward(result.model, train.features);
                sel = refresh_selection(probs, norm_features, train.observed_labels, K, thresholds,
                                        sel_opts);
                thresholds = sel.thresholds;
            }

            std::vector<std::size_t> labeled_idx, unlabeled_idx;
            for (std::size_t i = 0; i < train.size(); ++i) {
                (sel.clean.clean_mask[i] ? labeled_idx : unlabeled_idx).push_back(i);
            }
            round_rng.shuffle(labeled_idx);
            round_rng.shuffle(unlabeled_idx);

            const std::size_t B = static_cast<std::size_t>(config.batch_size);
            const std::size_t driver = std::max(unlabeled_idx.size(), labeled_idx.size());
            const std::size_t n_batches = driver == 0 ? 0 : (driver + B - 1) / B;

            RoundMetrics rm;
            rm.round = round;
            rm.n_clean = static_cast<int>(labeled_idx.size());
            std::size_t kept_total = 0, kept_correct = 0;
            std::size_t lab_cursor = 0;

            for (std::size_t b = 0; b < n_batches; ++b) {
                // Unlabeled slice for this batch (may be empty).
                const std::size_t ustart = std::min(b * B, unlabeled_idx.size());
                const std::size_t ustop = std::min(ustart + B, unlabeled_idx.size());
                const std::vector<std::size_t> ubatch(unlabeled_idx.begin() + ustart,
                                                      unlabeled_idx.begin() + ustop);

                // Labeled slice cycles through the clean set.
                std::vector<std::size_t> lbatch;
                if (!labeled_idx.empty()) {
                    const std::size_t take = std::min(B, labeled_idx.size());
                    for (std::size_t t = 0; t < take; ++t) {
                        lbatch.push_back(labeled_idx[(lab_cursor + t) % labeled_idx.size()]);
                    }
                    lab_cursor = (lab_cursor + take) % labeled_idx.size();
                }

                const Matrix lab_x = gather_rows(train.features, lbatch);
                std::vector<int> lab_y(lbatch.size());
                for (std::size_t t = 0; t < lbatch.size(); ++t) {
                    lab_y[t] = train.observed_labels[lbatch[t]];
                }

                double l_sw = 0.0, l_con = 0.0;
                Matrix pseudo_x(0, train.features.cols());
                std::vector<int> pseudo_y;

                if (!ubatch.empty()) {
                    const Matrix raw_u = gather_rows(train.features, ubatch);
                    const ViewPair views = make_views(raw_u, round_rng, config.weak_sigma,
                                                      config.strong_sigma, config.strong_mask_frac);
                    const Matrix probs_weak = forward(result.model, views.weak);
                    const Matrix weak_norm = l2_normalize_rows(views.weak);

                    const Matrix c_weak = cost_matrix(sel.centroids, weak_norm);
                    const SinkhornResult sink =
                        sinkhorn(c_weak, mu, uniform_marginal(ubatch.size()), config.sinkhorn_eps,
                                 config.sinkhorn_iters, config.sinkhorn_tol);
                    const OtLabels ot = plan_to_labels(sink.plan);

                    OtLabels ot_for_labels = ot;
                    if (!toggles.otp) {
                        std::fill(ot_for_labels.present.begin(), ot_for_labels.present.end(), false);
                    }
                    const PseudoLabelSet pseudo =
                        assign_pseudo_labels(probs_weak, ot_for_labels, config.tau1);

                    const Matrix c_strong = cost_matrix(sel.centroids, views.strong);
                    l_sw = consistency_loss(sink.plan, c_strong);
                    l_con = contrastive_loss(weak_norm, views.strong, config.contrast_temperature);

                    std::vector<std::size_t> kept_rows;
                    for (std::size_t t = 0; t < ubatch.size(); ++t) {
                        if (!pseudo.kept[t]) continue;
                        kept_rows.push_back(t);
                        pseudo_y.push_back(pseudo.labels[t]);
                        ++kept_total;
                        if (pseudo.labels[t] == train.true_labels[ubatch[t]]) ++kept_correct;
                        if (pseudo.source[t] == PseudoSource::Model) {
                            ++rm.n_model;
                        } else {
                            ++rm.n_transport;
                        }
                    }
                    pseudo_x = gather_rows(views.weak, kept_rows);

                    // Sub-threshold population: where the confidence branch fails.
                    for (std::size_t t = 0; t < ubatch.size(); ++t) {
                        const auto row = probs_weak.row(t);
                        const auto arg_it = std::max_element(row.begin(), row.end());
                        if (*arg_it >= config.tau1) continue;
                        ++rm.sub_threshold_total;
                        const int truth = train.true_labels[ubatch[t]];
                        if (ot.present[t] && ot.labels[t] == truth) ++rm.sub_threshold_ot_correct;
                        if (static_cast<int>(arg_it - row.begin()) == truth) {
                            ++rm.sub_threshold_model_correct;
                        }
                    }

                    if (dump_plans) {
                        result.plan_dumps.push_back(PlanDump{round, static_cast<int>(b),
                                                             sink.iterations, sink.row_violation,
                                                             sink.col_violation, sink.plan.values});
                    }
                }

                const double l_ssl_val = ssl_loss(result.model, lab_x, lab_y, pseudo_x, pseudo_y);
                const LossBreakdown breakdown =
                    total_loss(l_ssl_val, l_sw, l_con, config.lambda_sw, config.lambda_c);
                rm.l_ssl += breakdown.l_ssl;
                rm.l_sw += breakdown.l_sw;
                rm.l_con += breakdown.l_con;
                rm.l_total += breakdown.l_total;

                const Gradient grad = ssl_grad(result.model, lab_x, lab_y, pseudo_x, pseudo_y);
                sgd_step(result.model, grad, config.lr);
            }

            if (n_batches > 0) {
                rm.l_ssl /= static_cast<double>(n_batches);
                rm.l_sw /= static_cast<double>(n_batches);
                rm.l_con /= static_cast<double>(n_batches);
                rm.l_total /= static_cast<double>(n_batches);
            }
            rm.pseudo_accuracy =
                kept_total == 0 ? 0.0 : static_cast<double>(kept_correct) / kept_total;
            rm.test_accuracy = accuracy(result.model, test_features, test_labels);
            result.rounds.push_back(rm);
        } catch (const std::exception& e) {
            throw std::runtime_error("ssl round " + std::to_string(round) + ": " + e.what());
        }
    }

    result.final_test_accuracy = config.ssl_rounds > 0 ? result.rounds.back().test_accuracy
                                                       : result.warmup_test_accuracy;
    return result;
}

}  // namespace otc
