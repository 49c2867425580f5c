// pecm: command-line driver for the prototype-enhanced cross-modal
// retrieval engine. Subcommands: synth, train, rank, eval.
//
// Exit codes are a public contract:
//   0 success
//   1 invalid input data (bad file, bad pairing, ...)
//   2 invalid flags
//   3 write failure
//   4 non-finite loss during training
//   5 corpus/checkpoint K mismatch
//   6 unresolvable item id during evaluation

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pecm/eval.hpp"
#include "pecm/io.hpp"
#include "pecm/losses.hpp"
#include "pecm/parallel.hpp"
#include "pecm/ranking.hpp"

namespace {

/// Output-side failure, mapped to exit 3 (read-side IoFailure maps to 1).
struct WriteFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Id in an eval input that cannot be resolved, mapped to exit 6.
struct UnresolvableId : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class F>
void writing(F&& f) {
    try {
        f();
    } catch (const pecm::IoFailure& e) {
        throw WriteFailure(e.what());
    }
}

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Writes a fully materialized text artifact; "-" selects stdout.
void write_text(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::fwrite(content.data(), 1, content.size(), stdout);
        if (std::fflush(stdout) != 0) throw WriteFailure("write failed for stdout");
        return;
    }
    writing([&] {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw pecm::IoFailure("cannot open " + path + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw pecm::IoFailure("write failed for " + path);
    });
}

enum class Direction { I2R, R2I };

const std::map<std::string, Direction> kDirectionNames{{"i2r", Direction::I2R},
                                                       {"r2i", Direction::R2I}};
const std::map<std::string, pecm::Transform> kTransformNames{
    {"raw", pecm::Transform::Raw}, {"shifted", pecm::Transform::Shifted}};
const std::map<std::string, pecm::DiversityMode> kDivModeNames{
    {"verbatim", pecm::DiversityMode::Verbatim}, {"repulsive", pecm::DiversityMode::Repulsive}};

template <class M>
std::string name_of(const M& names, typename M::mapped_type value) {
    for (const auto& [name, v] : names) {
        if (v == value) return name;
    }
    return "?";
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::size_t pairs = 0;
    std::size_t classes = 1;
    std::size_t dim = 32;
    std::size_t k = 26;
    double noise_sigma = 0.1;
    double ambiguity_fraction = 0.0;
    double ambiguity_sigma = 0.0;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string labels_out;
    std::string ambiguous_out;
};

int run_synth(const SynthArgs& a) {
    pecm::SyntheticSpec spec;
    spec.n_pairs = a.pairs;
    spec.n_classes = a.classes;
    spec.dim = a.dim;
    spec.k = a.k;
    spec.noise_sigma = a.noise_sigma;
    spec.ambiguity_fraction = a.ambiguity_fraction;
    spec.ambiguity_sigma = a.ambiguity_sigma;
    spec.seed = a.seed;
    const pecm::SyntheticCorpus syn = pecm::generate_synthetic(spec);

    std::vector<pecm::PrototypeSet> images;
    images.reserve(syn.corpus.images().size());
    for (const auto& [id, set] : syn.corpus.images()) images.push_back(set);
    std::vector<pecm::PrototypeSet> reports;
    reports.reserve(syn.corpus.reports().size());
    for (const auto& [id, set] : syn.corpus.reports()) reports.push_back(set);

    const std::filesystem::path dir(a.out_dir);
    writing([&] {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw pecm::IoFailure("cannot create " + dir.string() + ": " + ec.message());
        pecm::save_prototype_sets(dir / "images.pecm", images);
        pecm::save_prototype_sets(dir / "reports.pecm", reports);
        pecm::save_pairing(dir / "pairing.tsv", syn.corpus.pairing());
        if (!a.labels_out.empty()) pecm::save_labels(a.labels_out, syn.class_of);
    });
    if (!a.ambiguous_out.empty()) {
        std::string content;
        for (const std::string& id : syn.ambiguous_images) content += id + "\n";
        for (const std::string& id : syn.ambiguous_reports) content += id + "\n";
        write_text(a.ambiguous_out, content);
    }
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string images, reports, pairing;
    std::size_t group_size = 3;
    std::string out;
    std::string trace = "-";
    int epochs = 30;
    int batch_size = 32;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    double mu = 1.0;
    double tau = 1.0;
    pecm::Transform transform = pecm::Transform::Shifted;
    pecm::DiversityMode div_mode = pecm::DiversityMode::Verbatim;
};

int run_train(const TrainArgs& a) {
    pecm::LoadOptions load_opts;
    load_opts.group_size = a.group_size;
    const pecm::Corpus corpus = pecm::load_corpus(a.images, a.reports, a.pairing, load_opts);

    pecm::LossConfig cfg;
    cfg.lambda = a.lambda;
    cfg.mu = a.mu;
    cfg.temperature = a.tau;
    cfg.transform = a.transform;
    cfg.diversity_mode = a.div_mode;

    pecm::TrainOptions opts;
    opts.epochs = a.epochs;
    opts.batch_size = a.batch_size;
    opts.lr0 = a.lr;
    opts.seed = a.seed;
    opts.threads = pecm::resolve_threads(0);

    const pecm::TrainResult result = pecm::train(corpus, cfg, opts);
    writing([&] { pecm::save_weights(result.weights, a.out); });

    std::ostringstream trace;
    trace << "# pecm-trace v1\n";
    trace << "# epochs " << a.epochs << "\n";
    trace << "# batch_size " << a.batch_size << "\n";
    trace << "# lr0 " << g17(a.lr) << "\n";
    trace << "# lambda " << g17(a.lambda) << "\n";
    trace << "# mu " << g17(a.mu) << "\n";
    trace << "# tau " << g17(a.tau) << "\n";
    trace << "# transform " << name_of(kTransformNames, a.transform) << "\n";
    trace << "# div_mode " << name_of(kDivModeNames, a.div_mode) << "\n";
    trace << "# seed " << a.seed << "\n";
    trace << "# columns epoch sim_loss conf_loss div_loss total\n";
    for (const pecm::TraceRow& row : result.trace) {
        trace << row.epoch << '\t' << g17(row.sim) << '\t' << g17(row.conf) << '\t'
              << g17(row.div) << '\t' << g17(row.total) << '\n';
    }
    write_text(a.trace, trace.str());
    return 0;
}

// ----------------------------------------------------------------- rank

struct RankArgs {
    std::string images, reports, pairing;
    std::size_t group_size = 3;
    std::string weights;
    Direction direction = Direction::I2R;
    bool no_rerank = false;
    pecm::Transform transform = pecm::Transform::Shifted;
    std::size_t shortlist = 0;
    std::string out = "-";
};

int run_rank(const RankArgs& a) {
    pecm::LoadOptions load_opts;
    load_opts.group_size = a.group_size;
    const pecm::Corpus corpus = pecm::load_corpus(a.images, a.reports, a.pairing, load_opts);
    const pecm::WeightVector weights =
        a.weights.empty() ? pecm::WeightVector::uniform(corpus.k())
                          : pecm::load_weights(a.weights, corpus.k());

    const auto& query_map =
        a.direction == Direction::I2R ? corpus.images() : corpus.reports();
    const auto& candidate_map =
        a.direction == Direction::I2R ? corpus.reports() : corpus.images();

    std::vector<const pecm::PrototypeSet*> queries;
    queries.reserve(query_map.size());
    for (const auto& [id, set] : query_map) queries.push_back(&set);
    pecm::PrototypeSetRefs candidates;
    candidates.reserve(candidate_map.size());
    for (const auto& [id, set] : candidate_map) candidates.push_back(&set);

    // An oversized shortlist re-scores everything, same as 0; the header
    // records the effective value so the two runs emit identical bytes.
    const std::size_t shortlist = a.shortlist >= candidates.size() ? 0 : a.shortlist;

    // One output block per query, filled in parallel and concatenated in
    // query-id order so the bytes do not depend on the worker count.
    std::vector<std::string> blocks(queries.size());
    std::vector<std::size_t> flips(queries.size(), 0);
    const unsigned threads = pecm::resolve_threads(0);
    pecm::parallel_for(queries.size(), threads, [&](std::size_t qi) {
        const pecm::PrototypeSet& query = *queries[qi];
        std::string block;
        if (a.no_rerank) {
            const pecm::RankedList list = pecm::initial_rank(query, candidates, weights);
            for (std::size_t r = 0; r < list.entries.size(); ++r) {
                block += query.item_id;
                block += '\t';
                block += list.entries[r].candidate_id;
                block += '\t';
                block += std::to_string(r + 1);
                block += '\t';
                block += g17(list.entries[r].score);
                block += '\n';
            }
        } else {
            const pecm::RerankedList list =
                pecm::rerank(query, candidates, weights, a.transform, shortlist);
            flips[qi] = list.sign_flips;
            for (std::size_t r = 0; r < list.entries.size(); ++r) {
                const pecm::RerankedEntry& e = list.entries[r];
                block += query.item_id;
                block += '\t';
                block += e.candidate_id;
                block += '\t';
                block += std::to_string(r + 1);
                block += '\t';
                block += g17(e.score.initial);
                block += '\t';
                block += g17(e.score.confidence);
                block += '\t';
                block += g17(e.score.final);
                block += '\n';
            }
        }
        blocks[qi] = std::move(block);
    });

    std::string content;
    content += "# pecm-rank v1\n";
    content += "# direction " + name_of(kDirectionNames, a.direction) + "\n";
    content += std::string("# rerank ") + (a.no_rerank ? "off" : "on") + "\n";
    content += "# transform " + name_of(kTransformNames, a.transform) + "\n";
    content += "# shortlist " + std::to_string(shortlist) + "\n";
    content += a.no_rerank ? "# columns query_id candidate_id rank initial\n"
                           : "# columns query_id candidate_id rank initial confidence final\n";
    for (const std::string& block : blocks) content += block;

    std::size_t total_flips = 0;
    for (std::size_t f : flips) total_flips += f;
    if (total_flips > 0) {
        std::fprintf(stderr,
                     "warning: %zu final scores changed sign relative to their initial "
                     "similarity (raw transform with negative confidence)\n",
                     total_flips);
    }

    write_text(a.out, content);
    return 0;
}

// ----------------------------------------------------------------- eval

struct EvalArgs {
    std::string ranking;
    std::string pairing;
    std::string labels;
    std::vector<std::size_t> ks{1, 5, 10};
    std::vector<std::string> metrics{"recall", "precision"};
    std::string out = "-";
};

struct RankingRecords {
    Direction direction = Direction::I2R;
    // Query id -> candidate ids in rank order (file row order).
    std::map<std::string, std::vector<std::string>> by_query;
};

RankingRecords read_ranking(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pecm::IoFailure("cannot open " + path);
    RankingRecords records;
    bool saw_banner = false;
    bool saw_direction = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "pecm-rank") saw_banner = true;
            if (key == "direction") {
                std::string value;
                ss >> value;
                const auto it = kDirectionNames.find(value);
                if (it == kDirectionNames.end()) {
                    throw pecm::ParseError(path + ":" + std::to_string(line_no) +
                                           ": unknown direction \"" + value + "\"");
                }
                records.direction = it->second;
                saw_direction = true;
            }
            continue;
        }
        if (!saw_banner) {
            throw pecm::ParseError(path + ":1: expected a `# pecm-rank v1` header");
        }
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cols.size() < 4 || cols[0].empty() || cols[1].empty()) {
            throw pecm::ParseError(path + ":" + std::to_string(line_no) +
                                   ": expected at least query, candidate, rank, score columns");
        }
        records.by_query[cols[0]].push_back(cols[1]);
    }
    if (!saw_banner) throw pecm::ParseError(path + ": not a pecm-rank file");
    if (!saw_direction) throw pecm::ParseError(path + ": header is missing `# direction`");
    if (records.by_query.empty()) throw pecm::ParseError(path + ": no ranking rows");
    return records;
}

int run_eval(const EvalArgs& a) {
    const RankingRecords records = read_ranking(a.ranking);
    const auto pairing = pecm::load_pairing(a.pairing);

    std::map<std::string, std::string> image_to_report;
    for (const auto& [rid, imgs] : pairing) {
        for (const std::string& iid : imgs) image_to_report[iid] = rid;
    }

    std::map<std::string, std::string> labels;
    if (!a.labels.empty()) labels = pecm::load_labels(a.labels);

    // Per-query relevant sets from the ground-truth pairing.
    std::map<std::string, std::set<std::string>> relevant;
    for (const auto& [query_id, cands] : records.by_query) {
        if (records.direction == Direction::I2R) {
            const auto it = image_to_report.find(query_id);
            if (it == image_to_report.end()) {
                throw UnresolvableId("eval: query image " + query_id +
                                     " does not appear in the pairing");
            }
            relevant[query_id] = {it->second};
        } else {
            const auto it = pairing.find(query_id);
            if (it == pairing.end()) {
                throw UnresolvableId("eval: query report " + query_id +
                                     " does not appear in the pairing");
            }
            relevant[query_id] = it->second;
        }
    }

    auto label_of = [&](const std::string& query_id) -> std::string {
        const auto it = labels.find(query_id);
        if (it == labels.end()) {
            throw UnresolvableId("eval: query " + query_id + " has no label entry");
        }
        return it->second;
    };

    std::ostringstream outs;
    outs << "# pecm-eval v1\n";
    outs << "# direction " << name_of(kDirectionNames, records.direction) << "\n";
    outs << "# queries " << records.by_query.size() << "\n";
    outs << "# columns metric k mode value\n";
    for (const std::string& metric : a.metrics) {
        for (const std::size_t k : a.ks) {
            std::vector<pecm::PerQueryValue> per_query;
            per_query.reserve(records.by_query.size());
            for (const auto& [query_id, cands] : records.by_query) {
                pecm::RankedList list;
                list.query_id = query_id;
                list.entries.reserve(cands.size());
                for (const std::string& cid : cands) list.entries.push_back({cid, 0.0});
                const double value = metric == "recall"
                                         ? pecm::recall_at_k(list, relevant[query_id], k)
                                         : pecm::precision_at_k(list, relevant[query_id], k);
                pecm::PerQueryValue v;
                v.query_id = query_id;
                if (!a.labels.empty()) v.class_label = label_of(query_id);
                v.value = value;
                per_query.push_back(std::move(v));
            }
            outs << metric << '\t' << k << '\t' << "micro" << '\t'
                 << g17(pecm::aggregate(per_query, pecm::AggregateMode::Micro)) << '\n';
            if (!a.labels.empty()) {
                outs << metric << '\t' << k << '\t' << "macro" << '\t'
                     << g17(pecm::aggregate(per_query, pecm::AggregateMode::Macro)) << '\n';
            }
        }
    }
    write_text(a.out, outs.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prototype-enhanced cross-modal retrieval engine"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth_cmd->add_option("--pairs", synth.pairs, "Number of image/report pairs")
        ->required()
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--classes", synth.classes, "Number of latent classes")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth_cmd->add_option("--dim", synth.dim, "Embedding dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth_cmd->add_option("--k", synth.k, "Prototypes per item")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth_cmd->add_option("--noise-sigma", synth.noise_sigma, "Per-prototype noise sigma")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth_cmd
        ->add_option("--ambiguity-fraction", synth.ambiguity_fraction,
                     "Fraction of pairs to corrupt")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    synth_cmd->add_option("--ambiguity-sigma", synth.ambiguity_sigma, "Corruption noise sigma")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
    synth_cmd
        ->add_option("--out", synth.out_dir,
                     "Output directory for images.pecm, reports.pecm, pairing.tsv")
        ->capture_default_str();
    synth_cmd->add_option("--labels-out", synth.labels_out, "Also write item labels here");
    synth_cmd->add_option("--ambiguous-out", synth.ambiguous_out,
                          "Also write the corrupted item ids here");

    TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "Train prototype weights");
    train_cmd->add_option("--images", train.images, "Image embedding file")->required();
    train_cmd->add_option("--reports", train.reports, "Report embedding file")->required();
    train_cmd->add_option("--pairing", train.pairing, "Ground-truth pairing file")->required();
    train_cmd->add_option("--group-size", train.group_size, "Patch grouping for grid files")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--out", train.out, "Checkpoint output path")->required();
    train_cmd->add_option("--trace", train.trace, "Loss trace output path, - for stdout")
        ->capture_default_str();
    train_cmd->add_option("--epochs", train.epochs, "Training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--batch-size", train.batch_size, "Pairs per batch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--lr", train.lr, "Initial learning rate (cosine annealed)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Shuffle seed")->capture_default_str();
    train_cmd->add_option("--lambda", train.lambda, "Confidence loss coefficient")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train_cmd->add_option("--mu", train.mu, "Diversity loss coefficient")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train_cmd->add_option("--tau", train.tau, "Contrastive temperature")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--transform", train.transform, "Similarity transform")
        ->transform(CLI::CheckedTransformer(kTransformNames, CLI::ignore_case))
        ->default_str("shifted");
    train_cmd->add_option("--div-mode", train.div_mode, "Diversity mode")
        ->transform(CLI::CheckedTransformer(kDivModeNames, CLI::ignore_case))
        ->default_str("verbatim");

    RankArgs rank;
    CLI::App* rank_cmd = app.add_subcommand("rank", "Rank candidates for every query");
    rank_cmd->add_option("--images", rank.images, "Image embedding file")->required();
    rank_cmd->add_option("--reports", rank.reports, "Report embedding file")->required();
    rank_cmd->add_option("--pairing", rank.pairing, "Ground-truth pairing file")->required();
    rank_cmd->add_option("--group-size", rank.group_size, "Patch grouping for grid files")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    rank_cmd->add_option("--weights", rank.weights,
                         "Weight checkpoint; omitted = uniform weights");
    rank_cmd->add_option("--direction", rank.direction, "Query direction")
        ->transform(CLI::CheckedTransformer(kDirectionNames, CLI::ignore_case))
        ->required();
    rank_cmd->add_flag("--no-rerank", rank.no_rerank,
                       "Stop at the initial cosine ranking (no confidence)");
    rank_cmd->add_option("--transform", rank.transform, "Similarity transform for confidence")
        ->transform(CLI::CheckedTransformer(kTransformNames, CLI::ignore_case))
        ->default_str("shifted");
    rank_cmd->add_option("--shortlist", rank.shortlist,
                         "Re-rank only the top M initial candidates, 0 = all")
        ->capture_default_str();
    rank_cmd->add_option("--out", rank.out, "Ranking output path, - for stdout")
        ->capture_default_str();

    EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Compute retrieval metrics of a ranking");
    eval_cmd->add_option("--ranking", eval.ranking, "Ranking records from `pecm rank`")
        ->required();
    eval_cmd->add_option("--pairing", eval.pairing, "Ground-truth pairing file")->required();
    eval_cmd->add_option("--labels", eval.labels,
                         "Item labels; enables macro rows in addition to micro");
    eval_cmd->add_option("--k", eval.ks, "Cutoff list")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--metrics", eval.metrics, "Metric list")
        ->delimiter(',')
        ->check(CLI::IsMember({"recall", "precision"}));
    eval_cmd->add_option("--out", eval.out, "Report output path, - for stdout")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(synth);
        if (train_cmd->parsed()) return run_train(train);
        if (rank_cmd->parsed()) return run_rank(rank);
        return run_eval(eval);
    } catch (const pecm::NonFiniteLoss& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const pecm::KMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    } catch (const UnresolvableId& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 6;
    } catch (const WriteFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
