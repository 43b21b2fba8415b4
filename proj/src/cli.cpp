#include "pivotmt/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include "pivotmt/cascade.hpp"
#include "pivotmt/checkpoint.hpp"
#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"
#include "pivotmt/metrics.hpp"
#include "pivotmt/subword.hpp"
#include "pivotmt/text_pipeline.hpp"

namespace pivotmt {

namespace {

namespace fs = std::filesystem;

void require_input(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError("cannot read " + path.string());
}

void require_output(const fs::path& path) {
  const auto parent = path.parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec))
    throw IoError("output directory does not exist: " + parent.string());
}

CorpusRules rules_from(const std::string& path) {
  if (path.empty()) return {};
  require_input(path);
  return CorpusRules::load(path);
}

std::vector<Sentence> read_sentences(const fs::path& path, const std::string& lang) {
  std::vector<Sentence> out;
  for (const auto& line : io::read_lines(path)) out.push_back(split_tokens(line, lang));
  return out;
}

void emit(const std::string& path, const std::vector<std::string>& lines, std::ostream& out) {
  if (path.empty()) {
    for (const auto& l : lines) out << l << '\n';
  } else {
    io::write_lines_atomic(path, lines);
  }
}

DecodeSettings decode_settings(std::size_t beam, std::size_t max_len, double alpha) {
  if (beam < 1) throw ConfigError("--beam must be at least 1");
  if (max_len < 1) throw ConfigError("--max-len must be at least 1");
  return {beam, max_len, alpha};
}

// ---- preprocess -------------------------------------------------------------

struct PreprocessArgs {
  std::string src_in, tgt_in, src_out, tgt_out, src_lang, tgt_lang, rules;
  std::size_t min_len = 1;
  std::size_t max_len = 50;
};

void cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  require_input(a.src_in);
  require_input(a.tgt_in);
  require_output(a.src_out);
  require_output(a.tgt_out);
  const auto rules = rules_from(a.rules);
  const auto raw = read_raw_corpus(a.src_in, a.tgt_in, a.src_lang, a.tgt_lang, rules);
  const auto kept = length_filter(raw, a.min_len, a.max_len);
  write_corpus(kept, a.src_out, a.tgt_out);
  out << fmt::format("kept {} of {} pairs\n", kept.size(), raw.size());
}

// ---- stats ------------------------------------------------------------------

struct StatsArgs {
  std::string src, tgt, src_lang, tgt_lang, name = "corpus", output;
};

void cmd_stats(const StatsArgs& a, std::ostream& out) {
  require_input(a.src);
  require_input(a.tgt);
  if (!a.output.empty()) require_output(a.output);
  const auto corpus = read_tokenized_corpus(a.src, a.tgt, a.src_lang, a.tgt_lang);
  const auto table = format_stats_table(corpus, corpus_stats(corpus), a.name);
  if (a.output.empty())
    out << table;
  else
    io::write_file_atomic(a.output, table);
}

// ---- learn-vocab ------------------------------------------------------------

struct LearnVocabArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string mode = "separate";
  std::size_t size = kDefaultVocabSize;
};

void cmd_learn_vocab(const LearnVocabArgs& a, std::ostream& out) {
  const VocabMode mode = parse_vocab_mode(a.mode);
  const std::size_t expected = mode == VocabMode::shared ? 1 : a.inputs.size();
  if (a.outputs.size() != expected)
    throw ConfigError(fmt::format("{} mode with {} inputs needs {} --output path(s), got {}",
                                  a.mode, a.inputs.size(), expected, a.outputs.size()));
  for (const auto& p : a.inputs) require_input(p);
  for (const auto& p : a.outputs) require_output(p);
  std::vector<std::vector<Sentence>> corpora;
  for (const auto& p : a.inputs) corpora.push_back(read_sentences(p, ""));
  const auto vocabs = learn(corpora, a.size, mode);
  for (std::size_t i = 0; i < vocabs.size(); ++i) {
    vocabs[i].save(a.outputs[i]);
    out << fmt::format("{}: {} tokens, {} merges\n", a.outputs[i], vocabs[i].size(),
                       vocabs[i].merges().size());
  }
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string src, tgt, src_lang, tgt_lang, output, rules;
  std::string src_vocab, tgt_vocab;
  std::string vocab_mode = "separate";
  std::size_t vocab_size = kDefaultVocabSize;
  std::string valid_src, valid_tgt;
  std::string log;
  ModelConfig model;
  TrainConfig train;
};

void cmd_train(TrainArgs a, std::uint64_t seed, std::ostream& out) {
  require_input(a.src);
  require_input(a.tgt);
  require_output(a.output);
  if (a.src_vocab.empty() != a.tgt_vocab.empty())
    throw ConfigError("--src-vocab and --tgt-vocab must be given together");
  if (!a.src_vocab.empty()) {
    require_input(a.src_vocab);
    require_input(a.tgt_vocab);
  }
  if (a.valid_src.empty() != a.valid_tgt.empty())
    throw ConfigError("--valid-src and --valid-tgt must be given together");
  if (!a.valid_src.empty()) {
    require_input(a.valid_src);
    require_input(a.valid_tgt);
  }
  if (!a.log.empty()) require_output(a.log);
  const VocabMode mode = parse_vocab_mode(a.vocab_mode);
  const auto rules = rules_from(a.rules);

  const auto corpus = read_tokenized_corpus(a.src, a.tgt, a.src_lang, a.tgt_lang);
  std::optional<ParallelCorpus> valid;
  if (!a.valid_src.empty())
    valid = read_tokenized_corpus(a.valid_src, a.valid_tgt, a.src_lang, a.tgt_lang);

  const fs::path manifest(a.output);
  std::vector<std::string> log_lines;
  a.train.seed = seed;
  a.train.on_log = [&](const TrainProgress& p) {
    std::string line = fmt::format("step={} loss={:.6f} lr={:.6g} elapsed_s={:.2f}", p.step, p.loss,
                                   p.lr, p.elapsed_seconds);
    if (p.validation_loss) line += fmt::format(" valid_loss={:.6f}", *p.validation_loss);
    out << line << '\n' << std::flush;
    log_lines.push_back(std::move(line));
  };
  ModelConfig sized;
  a.train.on_checkpoint = [&](std::size_t step, const Parameters& params) {
    const auto path = manifest.parent_path() /
                      fmt::format("{}.step{}.ckpt", manifest.stem().string(), step);
    save_checkpoint(path, sized, params);
  };

  TranslationSystem system;
  if (a.src_vocab.empty()) {
    auto vocabs = learn({corpus.src_side(), corpus.tgt_side()}, a.vocab_size, mode);
    if (vocabs.size() == 1) vocabs.push_back(vocabs.front());
    sized = a.model;
    sized.src_vocab_size = vocabs[0].size();
    sized.tgt_vocab_size = vocabs[1].size();
    system = train_system(corpus, std::move(vocabs[0]), std::move(vocabs[1]), a.model, a.train,
                          rules.src, valid ? &*valid : nullptr);
  } else {
    auto src_vocab = SubwordVocab::load(a.src_vocab);
    auto tgt_vocab = SubwordVocab::load(a.tgt_vocab);
    sized = a.model;
    sized.src_vocab_size = src_vocab.size();
    sized.tgt_vocab_size = tgt_vocab.size();
    system = train_system(corpus, std::move(src_vocab), std::move(tgt_vocab), a.model, a.train,
                          rules.src, valid ? &*valid : nullptr);
  }
  save_system(system, manifest);
  if (!a.log.empty()) io::write_lines_atomic(a.log, log_lines);
  out << "saved " << manifest.string() << '\n';
}

// ---- translate --------------------------------------------------------------

struct DecodeArgs {
  std::size_t beam = 4;
  std::size_t max_len = 64;
  double alpha = 0.6;
};

struct TranslateArgs {
  std::string system, input, output;
  DecodeArgs decode;
};

void cmd_translate(const TranslateArgs& a, std::ostream& out) {
  require_input(a.system);
  require_input(a.input);
  if (!a.output.empty()) require_output(a.output);
  const auto settings = decode_settings(a.decode.beam, a.decode.max_len, a.decode.alpha);
  const auto system = load_system(a.system);
  std::vector<std::string> lines;
  for (const auto& line : io::read_lines(a.input)) lines.push_back(translate(system, line, settings));
  emit(a.output, lines, out);
}

// ---- cascade ----------------------------------------------------------------

struct CascadeArgs {
  std::string pipeline, stage1, stage2, input, output, pivot_output, save_pipeline;
  DecodeArgs decode;
  bool beam_given = false, max_len_given = false, alpha_given = false;
};

void cmd_cascade(const CascadeArgs& a, std::ostream& out) {
  if (a.pipeline.empty() == (a.stage1.empty() || a.stage2.empty()))
    throw ConfigError("give either --pipeline or both --stage1 and --stage2");
  for (const auto& p : {a.pipeline, a.stage1, a.stage2})
    if (!p.empty()) require_input(p);
  if (!a.save_pipeline.empty()) require_output(a.save_pipeline);
  if (!a.input.empty()) require_input(a.input);
  if (!a.output.empty()) require_output(a.output);
  if (!a.pivot_output.empty()) require_output(a.pivot_output);

  DecodeSettings settings = decode_settings(a.decode.beam, a.decode.max_len, a.decode.alpha);
  std::optional<CascadePipeline> pipeline;
  if (!a.pipeline.empty()) {
    pipeline.emplace(load_pipeline(a.pipeline));
    DecodeSettings merged = pipeline->settings();
    if (a.beam_given) merged.beam_size = settings.beam_size;
    if (a.max_len_given) merged.max_len = settings.max_len;
    if (a.alpha_given) merged.length_norm_alpha = settings.length_norm_alpha;
    pipeline->set_settings(merged);
  } else {
    TranslationSystem s1;
    TranslationSystem s2;
    try {
      s1 = load_system(a.stage1);
    } catch (const Error& e) {
      throw StageError("stage1", e);
    }
    try {
      s2 = load_system(a.stage2);
    } catch (const Error& e) {
      throw StageError("stage2", e);
    }
    pipeline.emplace(std::move(s1), std::move(s2), settings);
    if (!a.save_pipeline.empty())
      write_pipeline_manifest(a.save_pipeline, a.stage1, a.stage2, settings);
  }
  if (a.input.empty()) return;

  std::vector<std::string> outputs;
  std::vector<std::string> pivots;
  for (const auto& line : io::read_lines(a.input)) {
    auto r = cascade_translate(line, *pipeline);
    pivots.push_back(std::move(r.pivot_text));
    outputs.push_back(std::move(r.output_text));
  }
  if (!a.pivot_output.empty()) io::write_lines_atomic(a.pivot_output, pivots);
  emit(a.output, outputs, out);
}

// ---- bleu -------------------------------------------------------------------

struct BleuArgs {
  std::string hyp, ref, output;
  std::size_t max_n = 4;
  bool case_sensitive = true;
};

void cmd_bleu(const BleuArgs& a, std::ostream& out, std::ostream& err) {
  require_input(a.hyp);
  require_input(a.ref);
  if (!a.output.empty()) require_output(a.output);
  auto hyps = read_sentences(a.hyp, "");
  auto refs = read_sentences(a.ref, "");
  if (!a.case_sensitive) {
    err << "warning: case-insensitive scoring requested; scores are not comparable to "
           "case-sensitive BLEU\n";
    for (auto& s : hyps) s = fold_case(s);
    for (auto& s : refs) s = fold_case(s);
  }
  const auto report = bleu(hyps, refs, a.max_n);
  out << format_bleu_line(report) << '\n';
  if (!a.output.empty()) io::write_file_atomic(a.output, format_bleu_keyvalues(report));
}

int exit_code_for(const std::string& kind) {
  const std::string base = kind.starts_with("stage:") ? kind.substr(6) : kind;
  if (base == "config") return 2;
  if (base == "input" || base == "io" || base == "format") return 3;
  if (base == "training") return 4;
  return 1;
}

void add_decode_options(CLI::App* cmd, DecodeArgs& d) {
  cmd->add_option("--beam", d.beam, "Beam size; 1 decodes greedily")->capture_default_str();
  cmd->add_option("--max-len", d.max_len, "Maximum generated tokens per segment")
      ->capture_default_str();
  cmd->add_option("--alpha", d.alpha, "Length-normalization exponent")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pivot-based neural machine translation toolkit", "pivotmt"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "INI settings file with [subcommand] sections; flags take precedence");
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Tokenize, split and length-filter a parallel corpus");
  p->add_option("--src-in", pre.src_in, "Raw source file")->required();
  p->add_option("--tgt-in", pre.tgt_in, "Raw target file")->required();
  p->add_option("--src-lang", pre.src_lang, "Source language tag")->required();
  p->add_option("--tgt-lang", pre.tgt_lang, "Target language tag")->required();
  p->add_option("--src-out", pre.src_out, "Tokenized source output")->required();
  p->add_option("--tgt-out", pre.tgt_out, "Tokenized target output")->required();
  p->add_option("--rules", pre.rules, "Corpus rules file");
  p->add_option("--min-len", pre.min_len, "Minimum tokens per side")->capture_default_str();
  p->add_option("--max-len-filter", pre.max_len, "Maximum tokens per side")->capture_default_str();

  StatsArgs st;
  auto* s = app.add_subcommand("stats", "Print segment, word and vocabulary counts");
  s->add_option("--src", st.src, "Tokenized source file")->required();
  s->add_option("--tgt", st.tgt, "Tokenized target file")->required();
  s->add_option("--src-lang", st.src_lang, "Source language tag")->required();
  s->add_option("--tgt-lang", st.tgt_lang, "Target language tag")->required();
  s->add_option("--name", st.name, "Corpus name for the table")->capture_default_str();
  s->add_option("--output", st.output, "Write the table here instead of stdout");

  LearnVocabArgs lv;
  auto* l = app.add_subcommand("learn-vocab", "Learn subword vocabularies");
  l->add_option("--input", lv.inputs, "Tokenized corpus file (repeatable)")->required();
  l->add_option("--output", lv.outputs, "Vocabulary file (one when shared, else one per input)")
      ->required();
  l->add_option("--vocab-mode", lv.mode, "separate or shared")
      ->check(CLI::IsMember({"separate", "shared"}))
      ->capture_default_str();
  l->add_option("--size", lv.size, "Target vocabulary size")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one translation direction");
  t->add_option("--src", tr.src, "Tokenized source file")->required();
  t->add_option("--tgt", tr.tgt, "Tokenized target file")->required();
  t->add_option("--src-lang", tr.src_lang, "Source language tag")->required();
  t->add_option("--tgt-lang", tr.tgt_lang, "Target language tag")->required();
  t->add_option("--output", tr.output, "System manifest to write")->required();
  t->add_option("--rules", tr.rules, "Corpus rules file; its source side is stored with the system");
  t->add_option("--src-vocab", tr.src_vocab, "Source vocabulary file");
  t->add_option("--tgt-vocab", tr.tgt_vocab, "Target vocabulary file");
  t->add_option("--vocab-mode", tr.vocab_mode, "Used when no vocabulary files are given")
      ->check(CLI::IsMember({"separate", "shared"}))
      ->capture_default_str();
  t->add_option("--vocab-size", tr.vocab_size, "Used when no vocabulary files are given")
      ->capture_default_str();
  t->add_option("--valid-src", tr.valid_src, "Tokenized validation source");
  t->add_option("--valid-tgt", tr.valid_tgt, "Tokenized validation target");
  t->add_option("--layers", tr.model.num_layers)->capture_default_str();
  t->add_option("--d-model", tr.model.d_model)->capture_default_str();
  t->add_option("--heads", tr.model.num_heads)->capture_default_str();
  t->add_option("--d-ff", tr.model.d_ff)->capture_default_str();
  t->add_option("--max-seq-len", tr.model.max_seq_len)->capture_default_str();
  t->add_option("--dropout", tr.model.dropout_rate)->capture_default_str();
  t->add_option("--steps", tr.train.steps)->capture_default_str();
  t->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
  t->add_option("--lr", tr.train.adam.lr)->capture_default_str();
  t->add_option("--beta1", tr.train.adam.beta1)->capture_default_str();
  t->add_option("--beta2", tr.train.adam.beta2)->capture_default_str();
  t->add_option("--warmup", tr.train.warmup_steps, "Linear warmup steps")->capture_default_str();
  t->add_option("--eval-every", tr.train.eval_every)->capture_default_str();
  t->add_option("--patience", tr.train.patience, "Evaluations without improvement before stopping")
      ->capture_default_str();
  t->add_option("--log-every", tr.train.log_every)->capture_default_str();
  t->add_option("--checkpoint-every", tr.train.checkpoint_every)->capture_default_str();
  t->add_option("--log", tr.log, "Also write the loss log to this file");

  TranslateArgs tl;
  auto* x = app.add_subcommand("translate", "Translate with one system");
  x->add_option("--system", tl.system, "System manifest")->required();
  x->add_option("--input", tl.input, "Raw input file, one segment per line")->required();
  x->add_option("--output", tl.output, "Output file (stdout when omitted)");
  add_decode_options(x, tl.decode);

  CascadeArgs ca;
  auto* c = app.add_subcommand("cascade", "Translate through the pivot language");
  c->add_option("--pipeline", ca.pipeline, "Pipeline manifest");
  c->add_option("--stage1", ca.stage1, "Source-to-pivot system manifest");
  c->add_option("--stage2", ca.stage2, "Pivot-to-target system manifest");
  c->add_option("--input", ca.input, "Raw source file, one segment per line");
  c->add_option("--output", ca.output, "Output file (stdout when omitted)");
  c->add_option("--pivot-output", ca.pivot_output, "Also write the intermediate pivot text");
  c->add_option("--save-pipeline", ca.save_pipeline, "Write a pipeline manifest for the stages");
  add_decode_options(c, ca.decode);

  BleuArgs bl;
  auto* b = app.add_subcommand("bleu", "Corpus BLEU of a hypothesis file against references");
  b->add_option("--hyp", bl.hyp, "Tokenized hypotheses")->required();
  b->add_option("--ref", bl.ref, "Tokenized references")->required();
  b->add_option("--max-n", bl.max_n, "Highest n-gram order")->capture_default_str();
  b->add_option("--case-sensitive", bl.case_sensitive,
                "Compare tokens case-sensitively; false must be requested explicitly")
      ->capture_default_str();
  b->add_option("--output", bl.output, "Write a key=value report here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (p->parsed()) cmd_preprocess(pre, out);
    if (s->parsed()) cmd_stats(st, out);
    if (l->parsed()) cmd_learn_vocab(lv, out);
    if (t->parsed()) cmd_train(tr, seed, out);
    if (x->parsed()) cmd_translate(tl, out);
    if (c->parsed()) {
      ca.beam_given = c->count("--beam") > 0;
      ca.max_len_given = c->count("--max-len") > 0;
      ca.alpha_given = c->count("--alpha") > 0;
      cmd_cascade(ca, out);
    }
    if (b->parsed()) cmd_bleu(bl, out, err);
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pivotmt
