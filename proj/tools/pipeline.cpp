// pipeline <subcommand> [--config FILE] [--key value ...]
//
// Exit codes: 0 success, 2 configuration/validation error, 1 runtime failure.

#include <iostream>

#include <CLI11.hpp>

#include "egobody/pipeline/commands.hpp"

using namespace egobody;

namespace {

/// `--key value` and `--key=value` pairs left over after CLI11 parsing.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& rest) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& a = rest[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    const std::string body = a.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= rest.size()) throw ConfigError("'" + a + "' needs a value");
      out.emplace_back(body, rest[++i]);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Egocentric full-body reconstruction pipeline"};
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "configuration file (defaults apply when omitted)");

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->allow_extras();
    s->add_option("--config", config_file, "configuration file (defaults apply when omitted)");
    return s;
  };
  auto* defaults = app.add_subcommand("defaults", "print the default configuration");
  auto* gen = add("gen-data", "render the synthetic dataset");
  auto* tr_t = add("train-translate", "train the view translation model");
  auto* tr_r = add("train-recover", "train the mesh recovery model");
  auto* tr_x = add("train-texture", "train the texture model");
  auto* eval = add("eval", "score the test split and time each stage");
  auto* exper = add("experiment", "compare target arrangements A, B and C");

  auto* infer = add("infer", "reconstruct a textured, rigged mesh from two egocentric images");
  std::string front, back, infer_out;
  infer->add_option("--front", front, "front egocentric PNG")->required();
  infer->add_option("--back", back, "back egocentric PNG")->required();
  infer->add_option("--out", infer_out, "output directory")->required();

  auto* exp = add("export", "write the rigged body model, or a mesh for a params file");
  std::string exp_params, exp_texture, exp_out;
  exp->add_option("--params", exp_params, "params file (e.g. from infer)");
  exp->add_option("--texture", exp_texture, "texture PNG to reference from the material");
  exp->add_option("--out", exp_out, "output directory")->required();

  auto* anim = add("animate", "re-pose a recovered body with a pose sequence");
  AnimateOptions ao;
  std::string anim_params, anim_texture, anim_poses, anim_out, anim_compare;
  anim->add_option("--params", anim_params, "recovered params file")->required();
  anim->add_option("--texture", anim_texture, "texture PNG")->required();
  anim->add_option("--poses", anim_poses, "pose sequence file")->required();
  anim->add_option("--out", anim_out, "output directory")->required();
  anim->add_option("--compare-texture", anim_compare, "second texture; frames are scored against it by SSIM");
  anim->add_option("--yaw", ao.yaw_deg, "viewing angle in degrees (0 = front)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == defaults) {
      std::cout << config_text(PipelineConfig{});
      return 0;
    }
    std::optional<std::filesystem::path> file;
    if (!config_file.empty()) file = config_file;
    const PipelineConfig cfg = load_pipeline_config(file, parse_overrides(sub->remaining()));
    std::ostream& log = std::cout;

    if (sub == gen) cmd_gen_data(cfg, log);
    else if (sub == tr_t) cmd_train_translate(cfg, log);
    else if (sub == tr_r) cmd_train_recover(cfg, log);
    else if (sub == tr_x) cmd_train_texture(cfg, log);
    else if (sub == eval) cmd_eval(cfg, log);
    else if (sub == exper) cmd_experiment(cfg, log);
    else if (sub == infer) cmd_infer(cfg, front, back, infer_out, log);
    else if (sub == exp) {
      std::optional<std::filesystem::path> p, t;
      if (!exp_params.empty()) p = exp_params;
      if (!exp_texture.empty()) t = exp_texture;
      cmd_export(p, t, exp_out, log);
    } else if (sub == anim) {
      ao.params_file = anim_params;
      ao.texture_png = anim_texture;
      ao.poses_file = anim_poses;
      ao.out_dir = anim_out;
      if (!anim_compare.empty()) ao.compare_texture_png = anim_compare;
      cmd_animate(cfg, ao, log);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
