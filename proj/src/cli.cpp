// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gta/errors.hpp"
#include "gta/rewards.hpp"
#include "gta/run_log.hpp"
#include "gta/trainer.hpp"

#ifndef GTA_SOURCE_REVISION
#define GTA_SOURCE_REVISION "unknown"
#endif

namespace gta::cli {

namespace fs = std::filesystem;

namespace {

// Validation problems (bad input, config or data) exit 1; everything else 2.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kValidationError;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kValidationError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kValidationError;
    } catch (const CapacityError& e) {
        err << "capacity error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

TrainConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return TrainConfig::from_json(j);
}

std::string fmt_opt(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : "never"; }

struct RunSummary {
    std::string name;
    std::string method;
    std::string guess_loss_mode;
    std::string seed;
    std::string fingerprint;
    MetricsTable table;
    std::vector<double> steps;
    std::vector<double> answer;
    std::vector<double> guess;
    std::vector<double> total;
    std::optional<std::int64_t> steps_to_threshold;
    double final_accuracy = 0.0;
    double final_f1 = 0.0;
    std::int64_t final_step = 0;
};

RunSummary summarize_run(const fs::path& dir, double threshold, int window) {
    const fs::path log = dir / "metrics.tsv";
    if (!fs::exists(log)) {
        throw DataError("run " + dir.string() + " has no metrics log");
    }
    RunSummary s;
    s.name = fs::absolute(dir).lexically_normal().filename().string();
    if (s.name.empty()) {
        s.name = fs::absolute(dir).lexically_normal().parent_path().filename().string();
    }
    s.table = read_metrics_table(log);
    const auto header = [&](const std::string& k) {
        const auto it = s.table.header.find(k);
        return it == s.table.header.end() ? std::string("-") : it->second;
    };
    s.method = header("method");
    s.guess_loss_mode = header("guess_loss_mode");
    s.seed = header("seed");
    s.fingerprint = header("dataset_fingerprint");
    s.steps = s.table.numeric("step", "step");
    s.answer = s.table.numeric("mean_accuracy_reward", "step");
    s.guess = s.table.numeric("guess_accuracy", "step");
    s.total = s.table.numeric("mean_total_reward", "step");
    s.steps_to_threshold = gta::steps_to_threshold(s.steps, s.answer, threshold, window);
    const auto eval_steps = s.table.numeric("step", "eval");
    const auto eval_acc = s.table.numeric("eval_accuracy", "eval");
    const auto eval_f1 = s.table.numeric("eval_weighted_f1", "eval");
    if (eval_steps.empty()) {
        throw DataError("run " + dir.string() + " has no evaluation rows");
    }
    s.final_step = static_cast<std::int64_t>(eval_steps.back());
    s.final_accuracy = eval_acc.back();
    s.final_f1 = eval_f1.back();
    return s;
}

void write_svg(const fs::path& path, const std::vector<RunSummary>& runs) {
    constexpr double W = 720, H = 420, L = 60, R = 180, T = 30, B = 50;
    double max_step = 1;
    for (const auto& r : runs) {
        if (!r.steps.empty()) {
            max_step = std::max(max_step, r.steps.back());
        }
    }
    const auto x = [&](double s) { return L + (W - L - R) * s / max_step; };
    const auto y = [&](double v) { return T + (H - T - B) * (1.0 - v); };
    static const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
    std::ofstream os(path);
    fmt::print(os, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
                   "font-size=\"12\">\n", W, H);
    fmt::print(os, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    fmt::print(os, "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L, H - B, W - R);
    fmt::print(os, "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, T, H - B);
    for (double v : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        fmt::print(os, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2f}</text>\n", L - 6, y(v) + 4, v);
    }
    fmt::print(os, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">step</text>\n", (L + W - R) / 2, H - 15);
    fmt::print(os, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", W - R, H - B + 16, max_step);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        const char* color = colors[i % 6];
        for (int series = 0; series < 2; ++series) {
            const auto& v = series == 0 ? r.answer : r.guess;
            std::string pts;
            for (std::size_t k = 0; k < v.size(); ++k) {
                pts += fmt::format("{:.1f},{:.1f} ", x(r.steps[k]), y(v[k]));
            }
            fmt::print(os, "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{} points=\"{}\"/>\n", color,
                       series == 1 ? " stroke-dasharray=\"4 3\"" : "", pts);
        }
        fmt::print(os, "<text x=\"{}\" y=\"{}\" fill=\"{}\">{} (answer solid, guess dashed)</text>\n", W - R + 8,
                   T + 16 * static_cast<double>(i + 1), color, r.name);
    }
    os << "</svg>\n";
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        TrainConfig cfg = load_config(args.config);
        if (args.seed) {
            cfg.seed = *args.seed;
        }
        if (args.method) {
            cfg.method = parse_method(*args.method);
        }
        if (args.guess_loss) {
            cfg.guess_loss_mode = parse_guess_loss_mode(*args.guess_loss);
        }
        cfg.validate();
        if (args.force && args.resume) {
            throw ConfigError("--force and --resume are mutually exclusive");
        }
        const DatasetSplits data = load_dataset_dir(args.data);
        RunOptions opts;
        opts.force = args.force;
        opts.resume = args.resume;
        opts.source_revision = GTA_SOURCE_REVISION;
        const RunResult r = run(cfg, data, args.out, opts);
        fmt::print(out, "run {} finished at step {}: accuracy={:.4f} weighted_f1={:.4f}{}\n", args.out.string(),
                   r.final_step, r.final_eval.accuracy, r.final_eval.weighted_f1, r.halted ? " (halted)" : "");
        return r.halted ? kRuntimeError : kOk;
    });
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Policy policy = load_checkpoint(args.checkpoint);
        const DatasetSplits data = load_dataset_dir(args.data);
        if (args.split != "train" && args.split != "test") {
            throw InputError("split must be train or test");
        }
        std::vector<LabeledExample> examples = args.split == "train" ? data.train.examples : data.test.examples;
        if (args.limit > 0 && examples.size() > static_cast<std::size_t>(args.limit)) {
            examples.resize(static_cast<std::size_t>(args.limit));
        }
        const EvalResult e = evaluate(policy, examples, args.max_new_tokens);
        fmt::print(out, "accuracy\t{:.6f}\nweighted_f1\t{:.6f}\nformat_valid\t{:.6f}\nguess_accuracy\t{:.6f}\n",
                   e.accuracy, e.weighted_f1, e.format_valid_rate, e.guess_accuracy);
        fmt::print(out, "label\tsupport\tpredicted\ttrue_positive\tprecision\trecall\tf1\n");
        for (const auto& c : e.per_class) {
            fmt::print(out, "{}\t{}\t{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\n", c.label, c.support, c.predicted,
                       c.true_positive, c.precision, c.recall, c.f1);
        }
        return kOk;
    });
}

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.n < 1) {
            throw InputError("--n must be >= 1");
        }
        const Policy policy = load_checkpoint(args.checkpoint);
        const GtaFormat& format = policy.format();
        if (args.gold && !format.tmpl().has_label(*args.gold)) {
            throw InputError("--gold is not in the checkpoint's label set: " + *args.gold);
        }
        SamplingControls sc;
        sc.greedy = args.greedy;
        sc.temperature = args.temperature;
        sc.max_new_tokens = args.max_new_tokens;
        sc.validate();
        const auto prompt = format.build_prompt(args.text);
        const auto rollouts = policy.sample_completions(prompt, args.n, sc, args.seed);
        for (std::size_t i = 0; i < rollouts.size(); ++i) {
            const auto& r = rollouts[i];
            const GtaSegments seg = format.parse_completion(r.completion_tokens);
            fmt::print(out, "--- completion {} ---\n{}\n", i + 1, format.tokenizer().decode(r.completion_tokens));
            fmt::print(out, "format_valid={}\n", seg.format_valid ? "true" : "false");
            if (seg.format_valid) {
                fmt::print(out, "guess: {}\nthink: {}\nanswer: {}\n", seg.guess_text, seg.think_text, seg.answer_text);
            }
            if (args.gold) {
                const RewardBreakdown rb = assign_rewards(seg, *args.gold, format.tmpl().label_set);
                fmt::print(out, "format={} accuracy={} total={}\n", rb.format_reward, rb.accuracy_reward, rb.total);
            }
        }
        return kOk;
    });
}

int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.runs.size() < 2) {
            throw InputError("compare needs at least two run directories");
        }
        if (args.window < 1) {
            throw InputError("--window must be >= 1");
        }
        std::vector<RunSummary> runs;
        std::map<std::string, int> seen;
        for (const auto& dir : args.runs) {
            runs.push_back(summarize_run(dir, args.threshold, args.window));
            const int k = seen[runs.back().name]++;
            if (k > 0) {
                runs.back().name += fmt::format("#{}", k + 1);
            }
        }
        for (const auto& r : runs) {
            if (r.fingerprint != runs.front().fingerprint) {
                throw DataError(fmt::format("runs {} and {} used different datasets", runs.front().name, r.name));
            }
        }
        fs::create_directories(args.out);
        const std::string thr = fmt::format("steps_to_{:g}", args.threshold);
        std::ofstream table(args.out / "compare.tsv");
        fmt::print(table, "run\tmethod\tguess_loss_mode\tseed\t{}\tfinal_step\tfinal_accuracy\tfinal_weighted_f1\t"
                          "delta_{}\tdelta_accuracy\tdelta_weighted_f1\n", thr, thr);
        const auto& base = runs.front();
        for (const auto& r : runs) {
            std::string dsteps = "-";
            if (r.steps_to_threshold && base.steps_to_threshold) {
                dsteps = std::to_string(*r.steps_to_threshold - *base.steps_to_threshold);
            } else if (!r.steps_to_threshold && !base.steps_to_threshold) {
                dsteps = "0";
            }
            fmt::print(table, "{}\t{}\t{}\t{}\t{}\t{}\t{:.6f}\t{:.6f}\t{}\t{:.6f}\t{:.6f}\n", r.name, r.method,
                       r.guess_loss_mode, r.seed, fmt_opt(r.steps_to_threshold), r.final_step, r.final_accuracy,
                       r.final_f1, dsteps, r.final_accuracy - base.final_accuracy, r.final_f1 - base.final_f1);
            fmt::print(out, "{:<24} {:<5} {}={:<6} final_accuracy={:.4f} weighted_f1={:.4f}\n", r.name, r.method, thr,
                       fmt_opt(r.steps_to_threshold), r.final_accuracy, r.final_f1);
        }
        std::set<std::int64_t> all_steps;
        for (const auto& r : runs) {
            for (double s : r.steps) {
                all_steps.insert(static_cast<std::int64_t>(s));
            }
        }
        std::ofstream curves(args.out / "curves.tsv");
        curves << "step";
        for (const auto& r : runs) {
            fmt::print(curves, "\t{0}:answer_reward\t{0}:guess_accuracy\t{0}:total_reward", r.name);
        }
        curves << '\n';
        for (std::int64_t s : all_steps) {
            curves << s;
            for (const auto& r : runs) {
                const auto it = std::find(r.steps.begin(), r.steps.end(), static_cast<double>(s));
                if (it == r.steps.end()) {
                    curves << "\t-\t-\t-";
                    continue;
                }
                const auto k = static_cast<std::size_t>(it - r.steps.begin());
                fmt::print(curves, "\t{:.10g}\t{:.10g}\t{:.10g}", r.answer[k], r.guess[k], r.total[k]);
            }
            curves << '\n';
        }
        if (!table || !curves) {
            throw IoError("cannot write comparison files in " + args.out.string());
        }
        if (args.plot) {
            write_svg(args.out / "curves.svg", runs);
        }
        return kOk;
    });
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        SyntheticTaskSpec spec = SyntheticTaskSpec::with_classes(args.n_classes, args.seed);
        spec.min_words = args.min_words;
        spec.max_words = args.max_words;
        if (args.n_train < 1 || args.n_test < 1) {
            throw InputError("--train and --test must be >= 1");
        }
        const DatasetSplits d = write_synthetic_dataset(args.out, spec, args.n_train, args.n_test);
        fmt::print(out, "wrote {} train / {} test examples to {} (fingerprint {})\n", d.train.examples.size(),
                   d.test.examples.size(), args.out.string(), d.fingerprint);
        return kOk;
    });
}

int cmd_base(const BaseArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const TrainConfig cfg = load_config(args.config);
        const DatasetSplits data = load_dataset_dir(args.data);
        FormatPriorConfig prior;
        prior.steps = args.steps;
        prior.batch_size = args.batch_size;
        prior.learning_rate = args.learning_rate;
        prior.copy_probability = args.copy_probability;
        prior.seed = args.seed;
        prior.validate();
        const GtaFormat format(make_template(cfg, data.label_set));
        std::vector<std::string> texts;
        for (const auto& ex : data.train.examples) {
            texts.push_back(ex.text);
        }
        const TransformerLM model = train_format_prior(format, cfg.model, texts, prior);
        if (args.out.has_parent_path()) {
            fs::create_directories(args.out.parent_path());
        }
        save_checkpoint(args.out, format, model, {0, ""});
        fmt::print(out, "wrote base checkpoint {} ({} parameters)\n", args.out.string(), model.parameter_count());
        return kOk;
    });
}

int main_entry(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("gta");
    spdlog::set_default_logger(logger);
    if (const char* level = std::getenv("GTA_LOG_LEVEL")) {
        spdlog::set_level(spdlog::level::from_str(level));
    }

    CLI::App app{"Guess-Think-Answer classification trainer"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train a policy");
    t->add_option("--config", train.config, "run config (JSON)")->required();
    t->add_option("--data", train.data, "dataset directory")->required();
    t->add_option("--out", train.out, "run directory")->required();
    t->add_option("--seed", train.seed, "override the config seed");
    t->add_option("--method", train.method, "gta | grpo | sft");
    t->add_option("--guess-loss", train.guess_loss, "sft | rl");
    t->add_flag("--force", train.force, "overwrite an existing run directory");
    t->add_flag("--resume", train.resume, "continue from the latest checkpoint");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "greedy evaluation of a checkpoint");
    e->add_option("--checkpoint", ev.checkpoint)->required();
    e->add_option("--data", ev.data, "dataset directory")->required();
    e->add_option("--split", ev.split, "train | test");
    e->add_option("--limit", ev.limit, "evaluate the first N examples only");
    e->add_option("--max-new-tokens", ev.max_new_tokens);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "sample completions for one input");
    g->add_option("--checkpoint", gen.checkpoint)->required();
    g->add_option("--text", gen.text, "input text")->required();
    g->add_option("--n", gen.n, "number of completions");
    g->add_flag("--greedy", gen.greedy);
    g->add_option("--gold", gen.gold, "gold label; prints the reward breakdown");
    g->add_option("--seed", gen.seed);
    g->add_option("--temperature", gen.temperature);
    g->add_option("--max-new-tokens", gen.max_new_tokens);

    CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "compare finished runs");
    c->add_option("runs", cmp.runs, "run directories")->required();
    c->add_option("--out", cmp.out, "output directory")->required();
    c->add_flag("--plot", cmp.plot, "also render curves.svg");
    c->add_option("--threshold", cmp.threshold, "accuracy-reward threshold");
    c->add_option("--window", cmp.window, "trailing window for the threshold test");

    SynthArgs syn;
    auto* s = app.add_subcommand("synth", "write a synthetic marker task");
    s->add_option("--out", syn.out)->required();
    s->add_option("--classes", syn.n_classes);
    s->add_option("--train", syn.n_train);
    s->add_option("--test", syn.n_test);
    s->add_option("--min-words", syn.min_words);
    s->add_option("--max-words", syn.max_words);
    s->add_option("--seed", syn.seed);

    BaseArgs base;
    auto* b = app.add_subcommand("base", "fit a label-agnostic format-prior base model");
    b->add_option("--config", base.config, "run config supplying model shape and instruction")->required();
    b->add_option("--data", base.data, "dataset directory (texts only are used)")->required();
    b->add_option("--out", base.out, "checkpoint path")->required();
    b->add_option("--steps", base.steps);
    b->add_option("--batch-size", base.batch_size);
    b->add_option("--lr", base.learning_rate);
    b->add_option("--copy-probability", base.copy_probability);
    b->add_option("--seed", base.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& pe) {
        return app.exit(pe) == 0 ? kOk : kValidationError;
    }
    if (*t) {
        return cmd_train(train, std::cout, std::cerr);
    }
    if (*e) {
        return cmd_evaluate(ev, std::cout, std::cerr);
    }
    if (*g) {
        return cmd_generate(gen, std::cout, std::cerr);
    }
    if (*c) {
        return cmd_compare(cmp, std::cout, std::cerr);
    }
    if (*s) {
        return cmd_synth(syn, std::cout, std::cerr);
    }
    return cmd_base(base, std::cout, std::cerr);
}

}  // namespace gta::cli
