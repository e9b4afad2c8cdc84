#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "phame/app/commands.hpp"

namespace fs = std::filesystem;
using namespace phame;

int main(int argc, char** argv) {
  CLI::App cli{"Property-guided molecule editing with latent diffusion"};
  cli.require_subcommand(1);
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed_override;
  cli.add_option("--config", config_path, "configuration file")->required();
  cli.add_option("--out-dir", out_dir, "output directory (default $PHAME_OUT_DIR, then ./phame_out)");
  cli.add_option("--seed-override", seed_override, "replace run.seed");

  cli.add_subcommand("pairs", "mine training pairs from the corpus");
  cli.add_subcommand("train", "train the denoiser (one stage or a curriculum)");
  cli.add_subcommand("sample", "de novo generation");
  cli.add_subcommand("edit", "edit seed items");
  cli.add_subcommand("eval", "score a generations file");
  cli.add_subcommand("sweep", "edit and score over a guidance grid");
  cli.add_subcommand("show-config", "print the resolved configuration");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string cmd = cli.get_subcommands().front()->get_name();
  try {
    const fs::path cfg_file(config_path);
    if (!fs::exists(cfg_file)) throw Error(ErrorCode::Config, "config file " + config_path + " not found");
    const auto ctx = app::make_context(io::read_file(cfg_file), fs::absolute(cfg_file).parent_path(),
                                       app::resolve_out_dir(out_dir), seed_override);
    if (cmd == "show-config") {
      app::validate(ctx);
      std::cout << ctx.cfg.resolved_text();
    } else if (cmd == "pairs") {
      std::cout << app::cmd_pairs(ctx).string() << "\n";
    } else if (cmd == "train") {
      for (const auto& p : app::cmd_train(ctx).checkpoints) std::cout << p.string() << "\n";
    } else if (cmd == "sample") {
      std::cout << app::cmd_sample(ctx).string() << "\n";
    } else if (cmd == "edit") {
      std::cout << app::cmd_edit(ctx).string() << "\n";
    } else if (cmd == "eval") {
      std::cout << app::cmd_eval(ctx).to_text();
    } else if (cmd == "sweep") {
      std::cout << app::sweep_csv(app::cmd_sweep(ctx));
    }
  } catch (const Error& e) {
    std::cerr << "phame " << cmd << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "phame " << cmd << ": " << e.what() << "\n";
    return 3;
  }
  return 0;
}
