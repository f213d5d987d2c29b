#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "otc/classifier.hpp"
#include "otc/config.hpp"
#include "otc/datagen.hpp"
#include "otc/io.hpp"
#include "otc/metrics.hpp"
#include "otc/selection.hpp"
#include "otc/ssl.hpp"
#include "otc/transport.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace otc;

namespace {

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

ExperimentConfig resolve_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    validate(cfg);
    return cfg;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
    return (fs::path(out_dir) / name).string();
}

void require_files(const std::string& out_dir, const std::vector<std::string>& names,
                   const std::string& what) {
    for (const auto& n : names) {
        if (!fs::exists(fs::path(out_dir) / n)) {
            throw std::runtime_error("missing " + what + ": " + n + " not found in " + out_dir +
                                     " (run the producing stage first)");
        }
    }
}

Dataset load_dataset(const std::string& out_dir, int K) {
    require_files(out_dir, {"features.csv", "labels.csv"}, "dataset");
    Dataset ds;
    ds.features = read_features_csv(out_path(out_dir, "features.csv"));
    read_labels_csv(out_path(out_dir, "labels.csv"), ds.true_labels, ds.observed_labels);
    ds.class_counts = count_observed(ds.observed_labels, K);
    validate(ds);
    return ds;
}

void load_test_set(const std::string& out_dir, Matrix& features, std::vector<int>& labels) {
    require_files(out_dir, {"test_features.csv", "test_labels.csv"}, "dataset");
    features = read_features_csv(out_path(out_dir, "test_features.csv"));
    std::vector<int> observed;
    read_labels_csv(out_path(out_dir, "test_labels.csv"), labels, observed);
}

json group_scores_json(const GroupScores& s) {
    json j;
    j["classes"] = s.classes;
    j["precision"] = s.precision ? json(*s.precision) : json(nullptr);
    j["recall"] = s.recall ? json(*s.recall) : json(nullptr);
    j["f1"] = s.f1 ? json(*s.f1) : json(nullptr);
    return j;
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rounds) {
    std::ostringstream out;
    out << "round,l_ssl,l_sw,l_con,l_total,pseudo_accuracy,n_model,n_transport,n_clean,"
           "test_accuracy\n";
    for (const auto& r : rounds) {
        out << r.round << ',' << format_double(r.l_ssl) << ',' << format_double(r.l_sw) << ','
            << format_double(r.l_con) << ',' << format_double(r.l_total) << ','
            << format_double(r.pseudo_accuracy) << ',' << r.n_model << ',' << r.n_transport << ','
            << r.n_clean << ',' << format_double(r.test_accuracy) << '\n';
    }
    write_text_file(path, out.str());
}

int cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
    StageTimer timer;
    Rng rng(cfg.seed);

    const auto counts = longtail_counts(cfg.N, cfg.K, cfg.rho);
    Rng cluster_rng = rng.substream("clusters");
    const ClusterSpec spec =
        make_cluster_spec(cfg.K, cfg.dim, cfg.cluster_separation, cfg.cluster_stddev, cluster_rng);
    Rng feature_rng = rng.substream("features");
    Dataset ds = gaussian_dataset(counts, spec, feature_rng);
    const TransitionMatrix T = transition_matrix(counts, cfg.gamma);
    Rng corrupt_rng = rng.substream("corrupt");
    ds.observed_labels = corrupt_labels(ds.true_labels, T, corrupt_rng);
    ds.class_counts = count_observed(ds.observed_labels, cfg.K);
    validate(ds);

    const std::vector<int> test_counts(cfg.K, cfg.test_per_class);
    Rng test_rng = rng.substream("test");
    const Dataset test = gaussian_dataset(test_counts, spec, test_rng);

    fs::create_directories(out_dir);
    write_features_csv(out_path(out_dir, "features.csv"), ds.features);
    write_labels_csv(out_path(out_dir, "labels.csv"), ds.true_labels, ds.observed_labels);
    write_features_csv(out_path(out_dir, "test_features.csv"), test.features);
    write_labels_csv(out_path(out_dir, "test_labels.csv"), test.true_labels, test.observed_labels);

    const DatasetStats stats = dataset_stats(ds);
    json sidecar;
    sidecar["config"] = json::parse(config_to_json_text(cfg));
    sidecar["requested_counts"] = counts;
    sidecar["observed_counts"] = ds.class_counts;
    sidecar["realized_rho"] = stats.realized_rho ? json(*stats.realized_rho) : json(nullptr);
    sidecar["realized_gamma"] = stats.realized_gamma;
    sidecar["per_class_noise"] = stats.per_class_noise;
    write_text_file(out_path(out_dir, "dataset.json"), sidecar.dump(2) + "\n");

    auto manifest = RunManifest::load_or_create(out_dir, config_to_json_text(cfg), cfg.seed);
    manifest.record_stage("generate", {},
                          {"features.csv", "labels.csv", "test_features.csv", "test_labels.csv",
                           "dataset.json"},
                          timer.ms());
    manifest.save();
    std::cout << "generate: N=" << ds.size() << " K=" << cfg.K
              << " realized_gamma=" << stats.realized_gamma << "\n";
    return 0;
}

int cmd_warmup(const ExperimentConfig& cfg, const std::string& out_dir) {
    StageTimer timer;
    auto manifest = RunManifest::load_or_create(out_dir, config_to_json_text(cfg), cfg.seed);
    manifest.check_inputs_fresh("warmup", {"features.csv", "labels.csv"});
    const Dataset ds = load_dataset(out_dir, cfg.K);

    LinearModel model = zero_model(cfg.K, ds.features.cols());
    Rng warmup_rng = Rng(cfg.seed).substream("warmup");
    const WarmupTrace trace =
        train_warmup(model, ds, cfg.warmup_epochs, cfg.lr, cfg.batch_size, warmup_rng);

    write_text_file(out_path(out_dir, "model_warmup.json"), model_to_json_text(model) + "\n");
    std::ostringstream loss_csv;
    loss_csv << "epoch,loss\n";
    for (std::size_t e = 0; e < trace.epoch_loss.size(); ++e) {
        loss_csv << e << ',' << format_double(trace.epoch_loss[e]) << '\n';
    }
    write_text_file(out_path(out_dir, "warmup_loss.csv"), loss_csv.str());

    manifest.record_stage("warmup", {"features.csv", "labels.csv"},
                          {"model_warmup.json", "warmup_loss.csv"}, timer.ms());
    manifest.save();
    std::cout << "warmup: epochs=" << cfg.warmup_epochs
              << " final_loss=" << (trace.epoch_loss.empty() ? 0.0 : trace.epoch_loss.back())
              << "\n";
    return 0;
}

int cmd_select(const ExperimentConfig& cfg, const std::string& out_dir) {
    StageTimer timer;
    auto manifest = RunManifest::load_or_create(out_dir, config_to_json_text(cfg), cfg.seed);
    manifest.check_inputs_fresh("select", {"features.csv", "labels.csv", "model_warmup.json"});
    const Dataset ds = load_dataset(out_dir, cfg.K);
    require_files(out_dir, {"model_warmup.json"}, "warm-up model");
    const LinearModel model = model_from_json_text(read_text_file(out_path(out_dir, "model_warmup.json")));

    const Matrix probs = forward(model, ds.features);
    const Matrix norm = extract_features(ds.features, FeatureMode::NormalizedIdentity);
    ThresholdState prev;
    prev.lambda_ema = cfg.lambda_ema;
    const SelectionResult sel = refresh_selection(probs, norm, ds.observed_labels, cfg.K, prev);

    std::ostringstream csv;
    csv << "sample_id,observed_label,true_label,weighted_max,own_class_distance,clean_prob,"
           "clean_flag\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto row = sel.weighted.row(i);
        const double wmax = *std::max_element(row.begin(), row.end());
        csv << i << ',' << ds.observed_labels[i] << ',' << ds.true_labels[i] << ','
            << format_double(wmax) << ',' << format_double(sel.own_distance[i]) << ','
            << format_double(sel.clean.clean_prob[i]) << ',' << (sel.clean.clean_mask[i] ? 1 : 0)
            << '\n';
    }
    write_text_file(out_path(out_dir, "selection.csv"), csv.str());

    const GroupReport f1 = selection_f1(sel.clean.clean_mask, ds);
    json summary;
    summary["tau"] = sel.thresholds.tau;
    summary["gmm"] = {{"mean_low", sel.gmm.mean[0]},   {"mean_high", sel.gmm.mean[1]},
                      {"var_low", sel.gmm.var[0]},     {"var_high", sel.gmm.var[1]},
                      {"weight_low", sel.gmm.weight[0]}, {"degenerate", sel.gmm.degenerate}};
    summary["f1"] = {{"head", group_scores_json(f1.head)},
                     {"medium", group_scores_json(f1.medium)},
                     {"tail", group_scores_json(f1.tail)}};
    summary["centroid_support"] = sel.centroids.support;
    write_text_file(out_path(out_dir, "selection_summary.json"), summary.dump(2) + "\n");

    manifest.record_stage("select", {"features.csv", "labels.csv", "model_warmup.json"},
                          {"selection.csv", "selection_summary.json"}, timer.ms());
    manifest.save();
    std::cout << "select: clean="
              << std::count(sel.clean.clean_mask.begin(), sel.clean.clean_mask.end(), true) << "/"
              << ds.size() << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir, bool dump_plans) {
    StageTimer timer;
    auto manifest = RunManifest::load_or_create(out_dir, config_to_json_text(cfg), cfg.seed);
    manifest.check_inputs_fresh("train", {"features.csv", "labels.csv", "test_features.csv",
                                          "test_labels.csv"});
    const Dataset ds = load_dataset(out_dir, cfg.K);
    Matrix test_features;
    std::vector<int> test_labels;
    load_test_set(out_dir, test_features, test_labels);

    const PipelineResult res =
        run_pipeline(cfg, ds, test_features, test_labels, AblationToggles{}, dump_plans);

    write_text_file(out_path(out_dir, "model_final.json"), model_to_json_text(res.model) + "\n");
    write_metrics_csv(out_path(out_dir, "train_metrics.csv"), res.rounds);

    std::vector<std::string> outputs{"model_final.json", "train_metrics.csv"};
    if (dump_plans) {
        json dumps = json::array();
        for (const auto& d : res.plan_dumps) {
            json e;
            e["round"] = d.round;
            e["batch"] = d.batch;
            e["iterations"] = d.iterations;
            e["row_violation"] = d.row_violation;
            e["col_violation"] = d.col_violation;
            e["rows"] = d.plan.rows();
            e["cols"] = d.plan.cols();
            e["plan"] = d.plan.data();
            dumps.push_back(std::move(e));
        }
        write_text_file(out_path(out_dir, "plans.json"), dumps.dump() + "\n");
        outputs.push_back("plans.json");
    }

    manifest.record_stage("train",
                          {"features.csv", "labels.csv", "test_features.csv", "test_labels.csv"},
                          outputs, timer.ms());
    manifest.save();
    std::cout << "train: warmup_acc=" << res.warmup_test_accuracy
              << " final_acc=" << res.final_test_accuracy << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& out_dir, bool gnuplot) {
    StageTimer timer;
    auto manifest = RunManifest::load_or_create(out_dir, config_to_json_text(cfg), cfg.seed);
    manifest.check_inputs_fresh("evaluate", {"features.csv", "labels.csv", "model_final.json"});
    const Dataset ds = load_dataset(out_dir, cfg.K);
    Matrix test_features;
    std::vector<int> test_labels;
    load_test_set(out_dir, test_features, test_labels);
    require_files(out_dir, {"model_final.json"}, "trained model");
    const LinearModel model = model_from_json_text(read_text_file(out_path(out_dir, "model_final.json")));

    const double test_acc = accuracy(model, test_features, test_labels);
    const Matrix probs = forward(model, ds.features);
    const Matrix norm = extract_features(ds.features, FeatureMode::NormalizedIdentity);
    ThresholdState prev;
    prev.lambda_ema = cfg.lambda_ema;
    const SelectionResult sel = refresh_selection(probs, norm, ds.observed_labels, cfg.K, prev);
    const GroupReport f1 = selection_f1(sel.clean.clean_mask, ds);
    const DatasetStats stats = dataset_stats(ds);

    auto f1_or = [](const GroupScores& s) { return s.f1 ? *s.f1 : 0.0; };
    std::ostringstream csv;
    csv << "test_accuracy,head_f1,medium_f1,tail_f1,realized_gamma\n";
    csv << format_double(test_acc) << ',' << format_double(f1_or(f1.head)) << ','
        << format_double(f1_or(f1.medium)) << ',' << format_double(f1_or(f1.tail)) << ','
        << format_double(stats.realized_gamma) << '\n';
    write_text_file(out_path(out_dir, "evaluation.csv"), csv.str());

    json rep;
    rep["test_accuracy"] = test_acc;
    rep["selection_f1"] = {{"head", group_scores_json(f1.head)},
                           {"medium", group_scores_json(f1.medium)},
                           {"tail", group_scores_json(f1.tail)}};
    rep["realized_rho"] = stats.realized_rho ? json(*stats.realized_rho) : json(nullptr);
    rep["realized_gamma"] = stats.realized_gamma;
    write_text_file(out_path(out_dir, "evaluation.json"), rep.dump(2) + "\n");

    std::vector<std::string> outputs{"evaluation.csv", "evaluation.json"};
    if (gnuplot) {
        std::ostringstream dat;
        dat << "# group f1\n";
        dat << "head " << format_double(f1_or(f1.head)) << '\n';
        dat << "medium " << format_double(f1_or(f1.medium)) << '\n';
        dat << "tail " << format_double(f1_or(f1.tail)) << '\n';
        write_text_file(out_path(out_dir, "f1_groups.dat"), dat.str());
        outputs.push_back("f1_groups.dat");
    }

    manifest.record_stage("evaluate", {"features.csv", "labels.csv", "model_final.json"}, outputs,
                          timer.ms());
    manifest.save();
    std::cout << "evaluate: test_accuracy=" << test_acc << "\n";
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& toggles_arg, bool gnuplot) {
    StageTimer timer;
    auto manifest = RunManifest::load_or_create(out_dir, config_to_json_text(cfg), cfg.seed);
    const Dataset ds = load_dataset(out_dir, cfg.K);
    Matrix test_features;
    std::vector<int> test_labels;
    load_test_set(out_dir, test_features, test_labels);

    std::vector<std::string> ablate_list;
    {
        std::stringstream ss(toggles_arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            if (item != "cdt" && item != "lcs" && item != "otp") {
                throw std::invalid_argument("ablate: unknown toggle \"" + item +
                                            "\" (valid: cdt,lcs,otp)");
            }
            ablate_list.push_back(item);
        }
    }
    if (ablate_list.empty()) ablate_list = {"cdt", "lcs", "otp"};

    struct Variant {
        std::string name;
        AblationToggles toggles;
    };
    std::vector<Variant> variants{{"full", AblationToggles{}}};
    for (const auto& t : ablate_list) {
        AblationToggles tg;
        if (t == "cdt") tg.cdt = false;
        if (t == "lcs") tg.lcs = false;
        if (t == "otp") tg.otp = false;
        variants.push_back({"wo_" + t, tg});
    }

    std::ostringstream csv;
    csv << "variant,warmup_test_accuracy,final_test_accuracy,last_pseudo_accuracy\n";
    json rep;
    double full_acc = 0.0;
    for (const auto& v : variants) {
        const AblationReport r = ablation_run(cfg, ds, test_features, test_labels, v.toggles);
        const double pseudo_last = r.result.rounds.empty() ? 0.0 : r.result.rounds.back().pseudo_accuracy;
        csv << v.name << ',' << format_double(r.result.warmup_test_accuracy) << ','
            << format_double(r.result.final_test_accuracy) << ',' << format_double(pseudo_last)
            << '\n';
        rep[v.name] = {{"final_test_accuracy", r.result.final_test_accuracy},
                       {"warmup_test_accuracy", r.result.warmup_test_accuracy}};
        if (v.name == "full") full_acc = r.result.final_test_accuracy;
        std::cout << "ablate: " << v.name << " final_acc=" << r.result.final_test_accuracy << "\n";
    }
    for (auto& [name, entry] : rep.items()) {
        if (name != "full") {
            entry["delta_vs_full"] = full_acc - entry["final_test_accuracy"].get<double>();
        }
    }
    write_text_file(out_path(out_dir, "ablation.csv"), csv.str());
    write_text_file(out_path(out_dir, "ablation.json"), rep.dump(2) + "\n");

    std::vector<std::string> outputs{"ablation.csv", "ablation.json"};
    if (gnuplot) {
        std::ostringstream dat;
        dat << "# variant final_test_accuracy\n";
        for (auto& [name, entry] : rep.items()) {
            dat << name << ' ' << format_double(entry["final_test_accuracy"].get<double>()) << '\n';
        }
        write_text_file(out_path(out_dir, "ablation.dat"), dat.str());
        outputs.push_back("ablation.dat");
    }
    manifest.record_stage("ablate",
                          {"features.csv", "labels.csv", "test_features.csv", "test_labels.csv"},
                          outputs, timer.ms());
    manifest.save();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"otcurate: long-tailed noisy-label curation via optimal transport"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", toggles;
    std::optional<std::uint64_t> seed;
    bool dump_plans = false, gnuplot = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
        sub->add_option("--out", out_dir, "Output directory")->required();
        sub->add_option("--seed", seed, "Override the config seed");
    };
    add_common(app.add_subcommand("generate", "Synthesize a long-tailed noisy dataset"));
    add_common(app.add_subcommand("warmup", "Train the warm-up classifier"));
    add_common(app.add_subcommand("select", "Run clean/noisy selection from the warm-up model"));
    auto* train = app.add_subcommand("train", "Full pipeline: warm-up + semi-supervised rounds");
    add_common(train);
    train->add_flag("--dump-plans", dump_plans, "Dump transport plans and residuals as JSON");
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate the trained model");
    add_common(evaluate);
    evaluate->add_flag("--gnuplot", gnuplot, "Also emit gnuplot-compatible F1 columns");
    auto* ablate = app.add_subcommand("ablate", "Compare pipeline variants under one seed");
    add_common(ablate);
    ablate->add_option("--toggles", toggles, "Comma list of components to ablate (cdt,lcs,otp)");
    ablate->add_flag("--gnuplot", gnuplot, "Also emit gnuplot-compatible accuracy columns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        const ExperimentConfig cfg = resolve_config(config_path, seed);
        if (app.got_subcommand("generate")) return cmd_generate(cfg, out_dir);
        if (app.got_subcommand("warmup")) return cmd_warmup(cfg, out_dir);
        if (app.got_subcommand("select")) return cmd_select(cfg, out_dir);
        if (app.got_subcommand("train")) return cmd_train(cfg, out_dir, dump_plans);
        if (app.got_subcommand("evaluate")) return cmd_evaluate(cfg, out_dir, gnuplot);
        if (app.got_subcommand("ablate")) return cmd_ablate(cfg, out_dir, toggles, gnuplot);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
