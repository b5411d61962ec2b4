// Command-line front end for the dense correspondence pipeline:
// preprocess, correspond, build-model, fit, augment, landmarks, evaluate,
// synth and morph subcommands over OBJ/PLY meshes.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "facecorr/config.hpp"
#include "facecorr/dense_corr.hpp"
#include "facecorr/graph_org.hpp"
#include "facecorr/k3dm.hpp"
#include "facecorr/levelset_fill.hpp"
#include "facecorr/mesh_io.hpp"
#include "facecorr/preprocess.hpp"
#include "facecorr/sparse_init.hpp"
#include "facecorr/synth_eval.hpp"

namespace fs = std::filesystem;

namespace {

struct ConfigCli {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value

  fc::PipelineConfig resolve() const {
    fc::PipelineConfig cfg;
    if (!config_path.empty()) cfg = fc::load_config(config_path, cfg);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw fc::Error("override must be key=value: " + kv);
      fc::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void add_config_options(CLI::App* cmd, ConfigCli& cc) {
  cmd->add_option("--config", cc.config_path, "key=value config file");
  cmd->add_option("--set", cc.overrides, "config override key=value (repeatable)");
}

fc::PreprocessConfig preprocess_config(const fc::PipelineConfig& cfg) {
  return {cfg.crop_radius, cfg.grid_spacing, cfg.smoothing_weight, cfg.pose_max_iters};
}

Eigen::VectorXd read_alpha_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fc::Error("cannot open " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || !(std::isdigit(line[0]) || line[0] == '-' || line[0] == '+')) continue;
    values.push_back(std::stod(line));
  }
  Eigen::VectorXd alpha(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) alpha(i) = values[i];
  return alpha;
}

void write_alpha_csv(const Eigen::VectorXd& alpha, const std::string& path) {
  std::ofstream out(path);
  char buf[48];
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", alpha(i));
    out << buf;
  }
}

// Shared front half of `correspond` and `evaluate --rerun`: preprocess,
// sparse init, MST, dense loop, smooth-region fill.
fc::CorrespondedFaceSet run_pipeline(const std::vector<std::string>& inputs,
                                     const fc::PipelineConfig& cfg, std::ostream& log) {
  if (inputs.size() < 2) throw fc::Error("correspond needs at least 2 meshes");

  std::vector<fc::Mesh> meshes;
  std::vector<fc::RigidTransform> transforms;
  const fc::PreprocessMode mode =
      cfg.full_preprocess ? fc::PreprocessMode::kFull : fc::PreprocessMode::kRigidOnly;
  for (const auto& path : inputs) {
    fc::Mesh raw = fc::read_mesh(path);
    fc::compute_vertex_normals(raw);
    fc::PreprocessResult pre = fc::preprocess_pipeline(raw, preprocess_config(cfg), mode);
    meshes.push_back(std::move(pre.mesh));
    transforms.push_back(pre.to_canonical);
  }
  log << "preprocessed " << meshes.size() << " meshes\n";

  std::vector<fc::FaceContext> contexts;
  for (const auto& m : meshes) contexts.push_back(fc::make_face_context(m, cfg.threads));

  std::vector<const fc::Mesh*> mesh_ptrs;
  std::vector<const fc::SpatialIndex*> index_ptrs;
  for (const auto& ctx : contexts) {
    mesh_ptrs.push_back(ctx.mesh);
    index_ptrs.push_back(ctx.index.get());
  }
  const fc::SparseCorrespondenceSet sparse =
      fc::build_sparse_set(mesh_ptrs, index_ptrs, cfg.delta, cfg.subsample_step);
  log << "sparse correspondences: " << sparse.retained_angles.size() << " shared angles\n";

  std::vector<std::vector<fc::Vec2>> landmarks(meshes.size());
  for (std::size_t f = 0; f < meshes.size(); ++f)
    for (int vid : sparse.vertex_ids[f])
      landmarks[f].emplace_back(meshes[f].vertices[vid].x(), meshes[f].vertices[vid].y());
  const fc::FaceGraph graph = fc::weight_matrix(landmarks, cfg.threads);
  const fc::SpanningTree tree = fc::build_mst(graph);
  log << "spanning tree rooted at face " << tree.root << "\n";

  fc::DenseCorrParams dense;
  dense.t_k = cfg.t_k;
  dense.k_q_mult = cfg.k_q_mult;
  dense.n_q = cfg.n_q;
  dense.t_1 = cfg.t_1;
  dense.max_iters = cfg.max_iters;
  dense.dedup_mult = cfg.dedup_mult;
  dense.threads = cfg.threads;
  fc::CorrespondedFaceSet set = fc::run_dense_correspondence(contexts, tree, sparse, dense);
  log << "keypoint correspondences: " << set.point_count() << "\n";

  fc::LevelSetParams fill;
  fill.k_q_mult = cfg.k_q_mult;
  fill.dedup_mult = cfg.dedup_mult;
  fill.t_a_override = cfg.t_a;
  fill.threads = cfg.threads;
  fc::fill_smooth_regions(set, contexts, tree, cfg.n_q, fill);
  log << "after smooth-region fill: " << set.point_count() << "\n";

  set.to_canonical = transforms;
  return set;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dense 3D face correspondence, deformable model building and fitting"};
  app.require_subcommand(1);

  // --- preprocess ---
  auto* cmd_pre = app.add_subcommand("preprocess", "pose-normalize, crop and resample one mesh");
  std::string pre_in, pre_out;
  bool pre_rigid_only = false;
  ConfigCli pre_cfg;
  cmd_pre->add_option("--in", pre_in, "input mesh (obj/ply)")->required();
  cmd_pre->add_option("--out", pre_out, "output mesh (obj/ply)")->required();
  cmd_pre->add_flag("--rigid-only", pre_rigid_only, "skip the grid resample");
  add_config_options(cmd_pre, pre_cfg);

  // --- correspond ---
  auto* cmd_cor = app.add_subcommand("correspond", "dense correspondence across a face set");
  std::vector<std::string> cor_inputs;
  std::string cor_out;
  ConfigCli cor_cfg;
  cmd_cor->add_option("--inputs", cor_inputs, "input meshes")->required()->expected(-2);
  cmd_cor->add_option("--out", cor_out, "output directory")->required();
  add_config_options(cmd_cor, cor_cfg);

  // --- build-model ---
  auto* cmd_bld = app.add_subcommand("build-model", "deformable model from a corresponded set");
  std::string bld_corr, bld_out, bld_landmarks;
  ConfigCli bld_cfg;
  cmd_bld->add_option("--corr", bld_corr, "corresponded set directory")->required();
  cmd_bld->add_option("--out", bld_out, "output model file")->required();
  cmd_bld->add_option("--annotations", bld_landmarks,
                      "landmark file: `name index` per line, regions as `region name i j k ...`");
  add_config_options(cmd_bld, bld_cfg);

  // --- fit ---
  auto* cmd_fit = app.add_subcommand("fit", "morph the model into a query mesh");
  std::string fit_model, fit_query, fit_outdir, fit_region;
  ConfigCli fit_cfg;
  cmd_fit->add_option("--model", fit_model, "K3DM model file")->required();
  cmd_fit->add_option("--query", fit_query, "query mesh")->required();
  cmd_fit->add_option("--out", fit_outdir, "output directory");
  cmd_fit->add_option("--region", fit_region, "fit a named region only");
  add_config_options(cmd_fit, fit_cfg);

  // --- augment ---
  auto* cmd_aug = app.add_subcommand("augment", "insert new faces into an existing model");
  std::string aug_model, aug_corr, aug_out, aug_corr_out;
  std::vector<std::string> aug_faces;
  ConfigCli aug_cfg;
  cmd_aug->add_option("--model", aug_model, "K3DM model file")->required();
  cmd_aug->add_option("--corr", aug_corr, "source corresponded set directory")->required();
  cmd_aug->add_option("--faces", aug_faces, "new face meshes")->required()->expected(-1);
  cmd_aug->add_option("--out", aug_out, "output model file")->required();
  cmd_aug->add_option("--corr-out", aug_corr_out, "grown corresponded set directory");
  add_config_options(cmd_aug, aug_cfg);

  // --- landmarks ---
  auto* cmd_lmk = app.add_subcommand("landmarks", "fit a query and transfer named landmarks");
  std::string lmk_model, lmk_query, lmk_out, lmk_annotations;
  ConfigCli lmk_cfg;
  cmd_lmk->add_option("--model", lmk_model, "K3DM model file")->required();
  cmd_lmk->add_option("--query", lmk_query, "query mesh")->required();
  cmd_lmk->add_option("--out", lmk_out, "output CSV (default stdout)");
  cmd_lmk->add_option("--annotations", lmk_annotations, "`name index` per line (default: model)");
  add_config_options(cmd_lmk, lmk_cfg);

  // --- evaluate ---
  auto* cmd_evl = app.add_subcommand("evaluate", "ground-truth evaluation on a synthetic family");
  std::string evl_family, evl_corr, evl_out;
  ConfigCli evl_cfg;
  cmd_evl->add_option("--family", evl_family, "family directory from `synth`")->required();
  cmd_evl->add_option("--corr", evl_corr, "corresponded set directory")->required();
  cmd_evl->add_option("--out", evl_out, "report CSV path");
  add_config_options(cmd_evl, evl_cfg);

  // --- synth ---
  auto* cmd_syn = app.add_subcommand("synth", "generate a ground-truth synthetic family");
  std::string syn_out;
  ConfigCli syn_cfg;
  int syn_n = -1;
  double syn_warp = -1.0;
  std::uint64_t syn_seed = 0;
  bool syn_seed_set = false;
  cmd_syn->add_option("--out", syn_out, "output directory")->required();
  cmd_syn->add_option("--n", syn_n, "member count");
  cmd_syn->add_option("--warp", syn_warp, "warp magnitude (mm)");
  auto* seed_opt = cmd_syn->add_option("--seed", syn_seed, "random seed");
  add_config_options(cmd_syn, syn_cfg);

  // --- morph ---
  auto* cmd_mor = app.add_subcommand("morph", "shape-space interpolation as a PLY sequence");
  std::string mor_model, mor_from, mor_to, mor_out;
  int mor_steps = 10;
  ConfigCli mor_cfg;
  cmd_mor->add_option("--model", mor_model, "K3DM model file")->required();
  cmd_mor->add_option("--from", mor_from, "alpha CSV of the source instance")->required();
  cmd_mor->add_option("--to", mor_to, "alpha CSV of the target instance")->required();
  cmd_mor->add_option("--steps", mor_steps, "frame count (>= 2)");
  cmd_mor->add_option("--out", mor_out, "output directory")->required();
  add_config_options(cmd_mor, mor_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_pre) {
      const fc::PipelineConfig cfg = pre_cfg.resolve();
      fc::Mesh mesh = fc::read_mesh(pre_in);
      fc::compute_vertex_normals(mesh);
      const auto mode =
          pre_rigid_only ? fc::PreprocessMode::kRigidOnly : fc::PreprocessMode::kFull;
      fc::PreprocessResult pre = fc::preprocess_pipeline(mesh, preprocess_config(cfg), mode);
      fc::write_mesh(pre.mesh, pre_out);
      std::cout << "vertices " << pre.mesh.vertices.size() << " triangles "
                << pre.mesh.triangles.size() << "\n";
    } else if (*cmd_cor) {
      const fc::PipelineConfig cfg = cor_cfg.resolve();
      const fc::CorrespondedFaceSet set = run_pipeline(cor_inputs, cfg, std::cout);
      fc::save_corresponded_set(set, cor_out);
      double worst = 0.0;
      for (double c : set.costs) worst = std::max(worst, c);
      std::cout << "points " << set.point_count() << " max_cost " << worst << "\n";
    } else if (*cmd_bld) {
      const fc::PipelineConfig cfg = bld_cfg.resolve();
      const fc::CorrespondedFaceSet set = fc::load_corresponded_set(bld_corr);
      fc::DeformableModel model = fc::build_model(set, cfg.energy_retain);
      if (!bld_landmarks.empty()) {
        std::ifstream in(bld_landmarks);
        if (!in) throw fc::Error("cannot open " + bld_landmarks);
        std::string line;
        while (std::getline(in, line)) {
          std::istringstream ss(line);
          std::string head;
          if (!(ss >> head) || head.empty() || head[0] == '#') continue;
          if (head == "region") {
            std::string name;
            ss >> name;
            std::vector<int> ids;
            int id;
            while (ss >> id) ids.push_back(id);
            model.regions[name] = ids;
          } else {
            int idx;
            if (ss >> idx) model.landmarks[head] = idx;
          }
        }
      }
      fc::save_model(model, bld_out);
      std::cout << "model: P " << model.point_count << " modes " << model.mode_count()
                << " faces " << model.face_count << "\n";
    } else if (*cmd_fit) {
      const fc::PipelineConfig cfg = fit_cfg.resolve();
      const fc::DeformableModel model = fc::load_model(fit_model);
      fc::Mesh query = fc::read_mesh(fit_query);
      fc::FitParams params{cfg.lambda, cfg.eps_f, cfg.fit_max_iters, {}};
      if (!fit_region.empty()) {
        auto it = model.regions.find(fit_region);
        if (it == model.regions.end()) throw fc::Error("unknown region " + fit_region);
        params.region = it->second;
      }
      const fc::FitResult result = fc::fit(model, query, params);
      std::printf("residual %.17g iterations %d\n",
                  result.residual_trace.empty() ? 0.0 : result.residual_trace.back(),
                  result.iterations);
      if (!fit_outdir.empty()) {
        fs::create_directories(fit_outdir);
        write_alpha_csv(result.alpha, (fs::path(fit_outdir) / "alpha.csv").string());
        fc::write_mesh(fc::instance_mesh(model, result.alpha),
                       (fs::path(fit_outdir) / "instance.ply").string(), {true, true});
        fc::Mesh reg;
        reg.vertices = result.registered_query;
        reg.triangles = model.triangulation;
        fc::sanitize(reg);
        fc::write_mesh(reg, (fs::path(fit_outdir) / "registered_query.ply").string(),
                       {true, true});
        std::ofstream trace((fs::path(fit_outdir) / "residual_trace.csv").string());
        trace << "iteration,residual\n";
        for (std::size_t i = 0; i < result.residual_trace.size(); ++i)
          trace << i + 1 << ',' << result.residual_trace[i] << '\n';
      }
    } else if (*cmd_aug) {
      const fc::PipelineConfig cfg = aug_cfg.resolve();
      const fc::DeformableModel model = fc::load_model(aug_model);
      const fc::CorrespondedFaceSet source = fc::load_corresponded_set(aug_corr);
      std::vector<fc::Mesh> faces;
      for (const auto& path : aug_faces) {
        fc::Mesh mesh = fc::read_mesh(path);
        fc::compute_vertex_normals(mesh);
        fc::PreprocessResult pre = fc::preprocess_pipeline(
            mesh, preprocess_config(cfg),
            cfg.full_preprocess ? fc::PreprocessMode::kFull : fc::PreprocessMode::kRigidOnly);
        faces.push_back(std::move(pre.mesh));
      }
      fc::AugmentParams params;
      params.fit = {cfg.lambda, cfg.eps_f, cfg.fit_max_iters, {}};
      params.energy_retain = cfg.energy_retain;
      params.hull_delta = cfg.delta;
      params.hull_subsample = cfg.subsample_step;
      const fc::AugmentResult result = fc::augment(model, source, faces, params);
      fc::save_model(result.model, aug_out);
      if (!aug_corr_out.empty()) fc::save_corresponded_set(result.corresponded, aug_corr_out);
      std::cout << "model faces " << result.model.face_count << " skipped "
                << result.skipped.size() << "\n";
    } else if (*cmd_lmk) {
      const fc::PipelineConfig cfg = lmk_cfg.resolve();
      const fc::DeformableModel model = fc::load_model(lmk_model);
      fc::Mesh query = fc::read_mesh(lmk_query);
      const fc::FitResult result =
          fc::fit(model, query, {cfg.lambda, cfg.eps_f, cfg.fit_max_iters, {}});
      std::vector<std::pair<std::string, int>> annotations;
      if (!lmk_annotations.empty()) {
        std::ifstream in(lmk_annotations);
        if (!in) throw fc::Error("cannot open " + lmk_annotations);
        std::string name;
        int idx;
        while (in >> name >> idx) annotations.emplace_back(name, idx);
      } else {
        for (const auto& [name, idx] : model.landmarks) annotations.emplace_back(name, idx);
      }
      const auto transfers = fc::transfer_landmarks(model, annotations, result);
      std::ostringstream csv;
      csv << "name,x,y,z,query_x,query_y,query_z\n";
      char buf[256];
      for (const auto& t : transfers) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      t.name.c_str(), t.on_instance.x(), t.on_instance.y(), t.on_instance.z(),
                      t.on_query.x(), t.on_query.y(), t.on_query.z());
        csv << buf;
      }
      if (lmk_out.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream out(lmk_out);
        out << csv.str();
      }
    } else if (*cmd_evl) {
      const fc::PipelineConfig cfg = evl_cfg.resolve();
      fc::PipelineConfig fam_cfg = cfg;
      const std::string meta = (fs::path(evl_family) / "family.cfg").string();
      fam_cfg = fc::load_config(meta, fam_cfg);
      const fc::FaceTemplate tpl = fc::make_face_template({fam_cfg.template_spacing});
      const fc::SyntheticFamily family =
          fc::generate_family(tpl, fam_cfg.family_n, fam_cfg.warp_magnitude, fam_cfg.seed);
      const fc::CorrespondedFaceSet set = fc::load_corresponded_set(evl_corr);
      const fc::EvalReport report = fc::evaluate_correspondence(family, set, cfg.threads);
      std::cout << fc::eval_report_summary(report);
      if (!evl_out.empty()) {
        std::ofstream out(evl_out);
        out << fc::eval_report_csv(report);
      }
    } else if (*cmd_syn) {
      syn_seed_set = seed_opt->count() > 0;
      fc::PipelineConfig cfg = syn_cfg.resolve();
      if (syn_n > 0) cfg.family_n = syn_n;
      if (syn_warp >= 0.0) cfg.warp_magnitude = syn_warp;
      if (syn_seed_set) cfg.seed = syn_seed;
      const fc::FaceTemplate tpl = fc::make_face_template({cfg.template_spacing});
      const fc::SyntheticFamily family =
          fc::generate_family(tpl, cfg.family_n, cfg.warp_magnitude, cfg.seed);
      fs::create_directories(syn_out);
      fc::write_mesh(tpl.mesh, (fs::path(syn_out) / "template.ply").string(), {true, true});
      char name[64];
      for (std::size_t m = 0; m < family.members.size(); ++m) {
        std::snprintf(name, sizeof(name), "member_%03d.ply", static_cast<int>(m));
        fc::write_mesh(family.members[m], (fs::path(syn_out) / name).string(), {true, true});
      }
      std::ofstream meta((fs::path(syn_out) / "family.cfg").string());
      meta << "family_n=" << cfg.family_n << "\nwarp_magnitude=" << cfg.warp_magnitude
           << "\ntemplate_spacing=" << cfg.template_spacing << "\nseed=" << cfg.seed << "\n";
      std::ofstream lmk((fs::path(syn_out) / "landmarks.txt").string());
      for (const auto& [lname, idx] : tpl.landmarks) lmk << lname << ' ' << idx << '\n';
      for (const auto& [rname, ids] : tpl.regions) {
        lmk << "region " << rname;
        for (int id : ids) lmk << ' ' << id;
        lmk << '\n';
      }
      std::cout << "family of " << family.members.size() << " members, template "
                << tpl.mesh.vertices.size() << " vertices\n";
    } else if (*cmd_mor) {
      (void)mor_cfg;
      const fc::DeformableModel model = fc::load_model(mor_model);
      fc::export_morph(model, read_alpha_csv(mor_from), read_alpha_csv(mor_to), mor_steps,
                       mor_out);
      std::cout << "wrote " << mor_steps << " frames\n";
    }
  } catch (const fc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
