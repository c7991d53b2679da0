#pragma once

#include <CLI11.hpp>

namespace lego::cli {

void add_corpus_commands(CLI::App& app);
void add_tvqvae_commands(CLI::App& app);
void add_codebook_commands(CLI::App& app);
void add_pretrain_command(CLI::App& app);
void add_downstream_commands(CLI::App& app);

}  // namespace lego::cli
