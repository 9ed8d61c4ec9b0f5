// Command-line frontend: full pipeline runs and single-stage re-runs.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "nemetyl/nemetyl.hpp"

namespace {

void add_run_options(CLI::App& app, nemetyl::RunSpec& spec, std::string& format, std::string& segmenter,
                     std::string& base) {
  app.add_option("--input,-i", spec.input, "Trace file (.pcap or canonical JSON)");
  app.add_option("--format", format, "Input format")
      ->check(CLI::IsMember({"auto", "pcap", "json"}))
      ->capture_default_str();
  app.add_option("--segmenter", segmenter, "fixed4 (alias fixed), boundaries or refined")
      ->check(CLI::IsMember({"fixed", "fixed4", "boundaries", "refined"}))
      ->capture_default_str();
  app.add_option("--base", base, "Base segmentation for the refined segmenter")
      ->check(CLI::IsMember({"auto", "fixed", "boundaries"}))
      ->capture_default_str();
  app.add_option("--chunk-len", spec.chunk_len, "Chunk length of the fixed segmenter")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--port", spec.udp_port, "UDP port selecting the protocol in pcap input");
  app.add_option("--limit", spec.config.trace_limit, "Messages kept after deduplication")
      ->capture_default_str();
  app.add_option("--penalty-f", spec.config.penalty_f, "Length penalty of the segment dissimilarity")
      ->capture_default_str();
  app.add_option("--gap-penalty", spec.config.gap_penalty, "Alignment gap score")->capture_default_str();
  app.add_option("--min-samples", spec.config.min_samples, "DBSCAN min_samples")->capture_default_str();
  app.add_option("--epsilon", spec.epsilon, "Manual DBSCAN epsilon (skips auto-configuration)");
  app.add_option("--epsilon-factor", spec.epsilon_factor,
                 "Scale of the auto-configured epsilon (default 0.8 for refined, else 1.0)");
  app.add_option("--top-k", spec.config.frequent_top_k, "Frequent values used by the refined segmenter")
      ->capture_default_str();
  app.add_option("--out,-o", spec.out_dir, "Output directory")->capture_default_str();
  app.add_option("--workers,-j", spec.workers, "Worker threads")->capture_default_str();
}

void resolve(nemetyl::RunSpec& spec, const std::string& format, const std::string& segmenter,
             const std::string& base) {
  using namespace nemetyl;
  static const std::map<std::string, InputFormat> formats{
      {"auto", InputFormat::Auto}, {"pcap", InputFormat::Pcap}, {"json", InputFormat::Json}};
  static const std::map<std::string, SegmenterKind> segmenters{{"fixed", SegmenterKind::Fixed},
                                                               {"fixed4", SegmenterKind::Fixed},
                                                               {"boundaries", SegmenterKind::Boundaries},
                                                               {"refined", SegmenterKind::Refined}};
  static const std::map<std::string, BaseSegmentation> bases{{"auto", BaseSegmentation::Auto},
                                                             {"fixed", BaseSegmentation::Fixed},
                                                             {"boundaries", BaseSegmentation::Boundaries}};
  spec.format = formats.at(format);
  spec.segmenter = segmenters.at(segmenter);
  spec.base = bases.at(base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Message type identification for binary network protocols"};
  app.require_subcommand(1);

  nemetyl::RunSpec spec;
  std::string format = "auto", segmenter = "fixed4", base = "auto";
  std::string stage;

  auto* run = app.add_subcommand("run", "Run the full pipeline and write all artifacts");
  add_run_options(*run, spec, format, segmenter, base);

  auto* stage_cmd = app.add_subcommand("stage", "Run a single stage from existing artifacts");
  stage_cmd->add_option("name", stage, "ingest|segment|dissim|matrix|cluster|align|refine|report")
      ->required();
  add_run_options(*stage_cmd, spec, format, segmenter, base);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    resolve(spec, format, segmenter, base);
    if (run->parsed()) {
      if (spec.input.empty()) throw nemetyl::Error(nemetyl::ErrorKind::Precondition, "--input is required");
      const auto report = nemetyl::run_pipeline(spec, &std::cerr);
      std::cout << nemetyl::report_to_json(report).dump(2) << '\n';
    } else {
      if (stage == "ingest" && spec.input.empty())
        throw nemetyl::Error(nemetyl::ErrorKind::Precondition, "--input is required");
      nemetyl::run_stage(stage, spec);
    }
  } catch (const nemetyl::Error& e) {
    std::cerr << "nemetyl: " << e.what() << '\n';
    return nemetyl::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "nemetyl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
