// Writes the planted-signal fixture used by the pipeline example and tests.
#include <CLI11.hpp>
#include <iostream>

#include "mfgpipe/csv.hpp"
#include "mfgpipe/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"planted-signal CSV generator", "mfgpipe-synth"};
  mfg::PlantedSignalSpec spec;
  std::string out;
  app.add_option("--rows", spec.rows);
  app.add_option("--noise", spec.noise_predictors, "number of pure-noise predictors");
  app.add_option("--signal-position", spec.signal_position, "0-based predictor slot of the signal");
  app.add_option("--coefficient", spec.signal_coefficient);
  app.add_option("--noise-sd", spec.noise_sd);
  app.add_flag("--extras", spec.extras, "add a sparse column and a tool column");
  app.add_option("--seed", spec.seed);
  app.add_option("--out", out)->required();
  CLI11_PARSE(app, argc, argv);
  try {
    mfg::write_csv(std::filesystem::path(out), mfg::make_planted_signal(spec));
    std::cout << "signal: " << mfg::planted_signal_name(spec) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
