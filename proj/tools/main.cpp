#include <iostream>

#include "commands.hpp"
#include "lego/common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lego: self-supervised scene-text pretraining toolkit"};
  app.require_subcommand(1);
  lego::cli::add_corpus_commands(app);
  lego::cli::add_tvqvae_commands(app);
  lego::cli::add_codebook_commands(app);
  lego::cli::add_pretrain_command(app);
  lego::cli::add_downstream_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const lego::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
