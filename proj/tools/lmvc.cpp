// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "lmvc/lmvc.hpp"
#include "lmvc/train/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace lmvc;

namespace {

struct ModelOpts {
  std::string profile = "default";
  std::string ckpt;
  uint64_t seed = 0;
  bool no_ivmvp = false, no_ivmem = false, no_ivcp = false, no_ivcem = false;
  std::string flow = "pyramid";
};

void add_model_opts(CLI::App* app, ModelOpts& mo) {
  app->add_option("--profile", mo.profile, "model size: default | small | micro")
      ->check(CLI::IsMember({"default", "small", "micro"}));
  app->add_option("--ckpt", mo.ckpt, "checkpoint with model weights");
  app->add_option("--model-seed", mo.seed, "seed for weight init when no ckpt is given");
  app->add_flag("--no-ivmvp", mo.no_ivmvp, "disable inter-view motion fusion");
  app->add_flag("--no-ivmem", mo.no_ivmem, "disable the inter-view motion prior");
  app->add_flag("--no-ivcp", mo.no_ivcp, "disable inter-view context prediction");
  app->add_flag("--no-ivcem", mo.no_ivcem, "disable the inter-view context prior");
  app->add_option("--flow", mo.flow, "flow backend: pyramid | block")
      ->check(CLI::IsMember({"pyramid", "block"}));
}

CodecConfig make_config(const ModelOpts& mo) {
  CodecConfig cfg;
  if (mo.profile == "small") cfg = CodecConfig::small();
  if (mo.profile == "micro") cfg = CodecConfig::micro();
  cfg.flow_backend =
      mo.flow == "block" ? FlowBackend::block_matching : FlowBackend::pyramid_net;
  return cfg;
}

std::unique_ptr<LmvcModel<float>> make_model(const ModelOpts& mo) {
  InterViewFlags flags;
  flags.ivmvp = !mo.no_ivmvp;
  flags.ivmem = !mo.no_ivmem;
  flags.ivcp = !mo.no_ivcp;
  flags.ivcem = !mo.no_ivcem;
  auto model = std::make_unique<LmvcModel<float>>(make_config(mo), flags, mo.seed);
  if (!mo.ckpt.empty()) load_checkpoint(mo.ckpt, *model);
  return model;
}

FrameArray load_input(const std::string& dir, int views, int frames,
                      const std::string& yuv_dims) {
  if (!yuv_dims.empty()) {
    auto x = yuv_dims.find('x');
    LMVC_REQUIRE(x != std::string::npos, ConfigError, "--yuv expects WxH");
    int w = std::stoi(yuv_dims.substr(0, x));
    int h = std::stoi(yuv_dims.substr(x + 1));
    FrameArray clip;
    for (int v = 0; v < views; ++v) {
      auto path = fs::path(dir) / ("view" + std::to_string(v) + ".yuv");
      auto fr = read_yuv420(path.string(), w, h, frames);
      LMVC_REQUIRE(int(fr.size()) >= frames, UsageError,
                   "not enough frames in " + path.string());
      fr.resize(size_t(frames));
      for (auto& f : fr) f.view_id = v;
      clip.frames.push_back(std::move(fr));
    }
    return clip;
  }
  return read_frame_dir(dir, views, frames);
}

int cmd_schedule(int ip, int frames, int views) {
  SchedulerConfig cfg;
  cfg.intra_period = ip;
  cfg.num_frames = frames;
  cfg.view_order.clear();
  for (int v = 0; v < views; ++v) cfg.view_order.push_back(v);
  std::cout << dump_schedule(build_schedule(cfg));
  return 0;
}

int cmd_synthesize(const std::string& in, const std::string& out, int views,
                   uint64_t seed, int frames) {
  std::vector<VideoFrame> src;
  for (int t = 0; frames < 0 || t < frames; ++t) {
    auto p = fs::path(in) / frame_filename(t);
    if (!fs::exists(p)) break;
    src.push_back(read_ppm(p.string()));
  }
  LMVC_REQUIRE(!src.empty(), UsageError, "no frames found under " + in);
  auto clip = synthesize_clip(src, views, seed);
  fs::create_directories(out);
  write_frame_dir(out, clip.views);
  std::ofstream mf(fs::path(out) / "manifest.txt");
  mf << dump_manifest(clip);
  std::cout << "wrote " << views << " views x " << src.size() << " frames to " << out
            << "\n";
  return 0;
}

int cmd_encode(const ModelOpts& mo, const std::string& in, const std::string& out,
               int views, int ip, int rate, int frames, const std::string& yuv) {
  auto model = make_model(mo);
  SequencePipeline<float> pipe(*model);
  FrameArray clip = load_input(in, views, frames, yuv);
  SchedulerConfig scfg;
  scfg.intra_period = ip;
  scfg.num_frames = frames;
  scfg.view_order.clear();
  for (int v = 0; v < views; ++v) scfg.view_order.push_back(v);
  auto res = pipe.encode(clip, scfg, rate);
  std::ofstream os(out, std::ios::binary);
  os.write(reinterpret_cast<const char*>(res.bitstream.data()),
           std::streamsize(res.bitstream.size()));
  double px = double(clip.height()) * clip.width() * frames * views;
  double psnr = 0;
  for (auto& s : res.stats) psnr += s.psnr;
  std::cout << "encoded " << views << "x" << frames << " @" << clip.width() << "x"
            << clip.height() << " rate " << rate << ": " << res.bitstream.size()
            << " bytes, " << res.total_payload_bits / px << " bpp, mean psnr "
            << psnr / double(res.stats.size()) << " dB\n";
  return 0;
}

int cmd_decode(const ModelOpts& mo, const std::string& in, const std::string& out,
               int from_poc, bool resilient) {
  auto model = make_model(mo);
  SequencePipeline<float> pipe(*model);
  std::ifstream is(in, std::ios::binary);
  LMVC_REQUIRE(is.good(), UsageError, "cannot open " + in);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  DecodePolicy policy;
  policy.from_poc = from_poc;
  policy.tolerate_dependent_errors = resilient;
  auto res = pipe.decode(bytes, policy);
  fs::create_directories(out);
  write_frame_dir(out, res.recon);
  std::cout << "decoded " << res.header.views << " views x "
            << (res.header.frames - from_poc) << " frames to " << out << "\n";
  return 0;
}

int cmd_extract_base(const std::string& in, const std::string& out) {
  std::ifstream is(in, std::ios::binary);
  LMVC_REQUIRE(is.good(), UsageError, "cannot open " + in);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  auto base = extract_base_view(bytes);
  std::ofstream os(out, std::ios::binary);
  os.write(reinterpret_cast<const char*>(base.data()), std::streamsize(base.size()));
  std::cout << "extracted base view: " << bytes.size() << " -> " << base.size()
            << " bytes\n";
  return 0;
}

int cmd_train(const ModelOpts& mo, const std::string& target, int stage, int steps,
              uint64_t seed, const std::string& data, const std::string& out_ckpt,
              int crop, int batch, double lr, int rate, int views, int log_every) {
  auto model = make_model(mo);
  TrainConfig tc;
  tc.target = target == "independent" ? TrainTarget::independent : TrainTarget::dependent;
  tc.stage = stage;
  tc.steps = steps;
  tc.seed = seed;
  tc.lr = lr;
  tc.batch_size = batch;
  tc.crop = crop;
  tc.rate_index = rate;
  tc.views = views;
  int sample_frames = (1 << training_schedule(tc.target, stage).unroll_levels) + 1;
  std::unique_ptr<ClipSource> src;
  if (data.empty() || data == "synthetic")
    src = std::make_unique<ClipSource>(sample_frames, 2 * crop, 2 * crop);
  else
    src = std::make_unique<ClipSource>(data, sample_frames);
  Trainer<float> trainer(*model, *src, tc);
  for (int i = 0; i < steps; ++i) {
    auto st = trainer.step();
    if (st.aborted) {
      std::cerr << "step " << st.step << " aborted (" << st.abort_unit << ")\n";
      continue;
    }
    if (log_every > 0 && (i % log_every == 0 || i + 1 == steps))
      std::cout << "step " << st.step << " rate " << st.rate_index << " loss "
                << st.mean.total << " (D " << st.mean.distortion << ", Rm "
                << st.mean.bits_motion << ", Ry " << st.mean.bits_content << ", |g| "
                << st.grad_norm << ")\n";
  }
  if (!out_ckpt.empty()) {
    save_checkpoint(out_ckpt, *model, &trainer.optimizer());
    std::cout << "saved " << out_ckpt << "\n";
  }
  return 0;
}

int cmd_eval(const ModelOpts& mo, const std::string& orig_dir,
             const std::string& bitstream_dir, const std::string& config_path,
             const std::string& csv_path, bool plots, const std::string& anchor) {
  auto model = make_model(mo);
  SequencePipeline<float> pipe(*model);
  std::ifstream cf(config_path);
  LMVC_REQUIRE(cf.good(), UsageError, "cannot open " + config_path);
  std::string cfg_text((std::istreambuf_iterator<char>(cf)),
                       std::istreambuf_iterator<char>());
  auto sequences = parse_sequence_config(cfg_text);

  std::vector<RdRecord> records;
  for (const auto& e : fs::directory_iterator(bitstream_dir)) {
    if (e.path().extension() != ".lmvc") continue;
    std::string stem = e.path().stem().string();
    // naming: <sequence>__<codec>__<anything>.lmvc
    auto p1 = stem.find("__");
    LMVC_REQUIRE(p1 != std::string::npos, UsageError,
                 "bitstream name must be <sequence>__<codec>__*.lmvc: " + stem);
    auto p2 = stem.find("__", p1 + 2);
    std::string seq = stem.substr(0, p1);
    std::string codec =
        p2 == std::string::npos ? stem.substr(p1 + 2) : stem.substr(p1 + 2, p2 - p1 - 2);
    const SequenceConfig* sc = nullptr;
    for (const auto& s : sequences)
      if (s.name == seq) sc = &s;
    LMVC_REQUIRE(sc != nullptr, ConfigError, "sequence not in config: " + seq);

    std::ifstream is(e.path(), std::ios::binary);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                               std::istreambuf_iterator<char>());
    auto dec = pipe.decode(bytes);
    auto orig = read_frame_dir((fs::path(orig_dir) / seq).string(), dec.header.views,
                               dec.header.frames);
    double payload_bits = 0;
    for (const auto& p : parse_stream(bytes).packets)
      payload_bits += 8.0 * double(p.payload.size());
    auto rd = compute_metrics(orig, dec.recon, payload_bits);
    records.push_back({seq, codec, dec.header.rate_index, rd.bpp, rd.psnr});
  }
  std::sort(records.begin(), records.end(), [](const RdRecord& a, const RdRecord& b) {
    return std::tie(a.sequence, a.codec, a.lambda_index) <
           std::tie(b.sequence, b.codec, b.lambda_index);
  });
  auto written = emit_report(records, csv_path, plots,
                             fs::path(csv_path).parent_path().string());
  for (const auto& w : written) std::cout << "wrote " << w << "\n";

  std::set<std::string> seqs, codecs;
  for (const auto& r : records) {
    seqs.insert(r.sequence);
    codecs.insert(r.codec);
  }
  if (codecs.size() < 2) return 0;
  std::string anchor_codec = anchor.empty() ? *codecs.begin() : anchor;
  for (const auto& seq : seqs) {
    std::vector<RDPoint> ac;
    for (const auto& r : records)
      if (r.sequence == seq && r.codec == anchor_codec) ac.push_back({r.bpp, r.psnr});
    if (ac.size() < 4) continue;
    for (const auto& codec : codecs) {
      if (codec == anchor_codec) continue;
      std::vector<RDPoint> tcv;
      for (const auto& r : records)
        if (r.sequence == seq && r.codec == codec) tcv.push_back({r.bpp, r.psnr});
      if (tcv.size() < 4) continue;
      std::cout << seq << ": BD-rate(" << codec << " vs " << anchor_codec
                << ") = " << bd_rate(ac, tcv) << "%\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lmvc: learned multiview video codec"};
  app.require_subcommand(1);

  auto* sch = app.add_subcommand("schedule", "print the hierarchical coding order");
  int ip = 8, frames = 9, views = 3;
  sch->add_option("--ip", ip, "intra period (power of two, <= 32)");
  sch->add_option("--frames", frames, "number of frames");
  sch->add_option("--views", views, "number of views");

  auto* syn = app.add_subcommand("synthesize", "make a multiview clip from one view");
  std::string syn_in, syn_out;
  int syn_views = 3, syn_frames = -1;
  uint64_t syn_seed = 0;
  syn->add_option("--in", syn_in, "directory of frame_%06d.ppm")->required();
  syn->add_option("--out", syn_out, "output directory")->required();
  syn->add_option("--views", syn_views, "views to synthesize (>= 2)");
  syn->add_option("--seed", syn_seed, "randomization seed");
  syn->add_option("--frames", syn_frames, "frame cap (default: all)");

  auto* enc = app.add_subcommand("encode", "encode a multiview frame directory");
  ModelOpts enc_mo;
  std::string enc_in, enc_out, enc_yuv;
  int enc_views = 3, enc_ip = 32, enc_rate = 0, enc_frames = 9;
  enc->add_option("--in", enc_in, "input directory (view<k>/ subdirs)")->required();
  enc->add_option("--out", enc_out, "output .lmvc file")->required();
  enc->add_option("--views", enc_views, "number of views");
  enc->add_option("--ip", enc_ip, "intra period");
  enc->add_option("--rate", enc_rate, "rate index 0..3")->check(CLI::Range(0, 3));
  enc->add_option("--frames", enc_frames, "number of frames to code");
  enc->add_option("--yuv", enc_yuv, "treat inputs as raw YUV420, dims WxH");
  add_model_opts(enc, enc_mo);

  auto* dec = app.add_subcommand("decode", "decode an .lmvc bitstream");
  ModelOpts dec_mo;
  std::string dec_in, dec_out;
  int dec_from = 0;
  bool dec_resilient = false;
  dec->add_option("--in", dec_in, "input .lmvc file")->required();
  dec->add_option("--out", dec_out, "output directory")->required();
  dec->add_option("--from-poc", dec_from, "random access point (multiple of the ip)");
  dec->add_flag("--resilient", dec_resilient,
                "skip dependent views on packet errors instead of aborting");
  add_model_opts(dec, dec_mo);

  auto* ext = app.add_subcommand("extract-base", "filter to the independent view");
  std::string ext_in, ext_out;
  ext->add_option("--in", ext_in, "input .lmvc file")->required();
  ext->add_option("--out", ext_out, "output .lmvc file")->required();

  auto* tr = app.add_subcommand("train", "train the codec");
  ModelOpts tr_mo;
  std::string tr_target = "dependent", tr_data = "synthetic", tr_out;
  int tr_stage = 3, tr_steps = 100, tr_crop = 256, tr_batch = 8, tr_rate = -1,
      tr_views = 2, tr_log = 10;
  uint64_t tr_seed = 0;
  double tr_lr = 1e-4;
  tr->add_option("--target", tr_target, "independent | dependent")
      ->check(CLI::IsMember({"independent", "dependent"}));
  tr->add_option("--stage", tr_stage,
                 "0: intra (independent only), 1: motion, 2: context, 3: joint");
  tr->add_option("--steps", tr_steps, "optimizer steps")->required();
  tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--data", tr_data, "clip directory, or 'synthetic'");
  tr->add_option("--out", tr_out, "checkpoint to write");
  tr->add_option("--crop", tr_crop, "training crop (multiple of 64)");
  tr->add_option("--batch", tr_batch, "batch size (gradient accumulation)");
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--rate", tr_rate, "fixed rate index; -1 samples per step");
  tr->add_option("--views", tr_views, "synthesized views per clip");
  tr->add_option("--log-every", tr_log, "log interval (0: silent)");
  add_model_opts(tr, tr_mo);

  auto* ev = app.add_subcommand("eval", "compute RD metrics over bitstreams");
  ModelOpts ev_mo;
  std::string ev_orig, ev_bs, ev_cfg, ev_csv = "rd.csv", ev_anchor;
  bool ev_plots = false;
  ev->add_option("--orig", ev_orig, "directory of original sequences")->required();
  ev->add_option("--bitstreams", ev_bs, "directory of .lmvc files")->required();
  ev->add_option("--config", ev_cfg, "sequence config file")->required();
  ev->add_option("--csv", ev_csv, "output CSV path");
  ev->add_flag("--plots", ev_plots, "emit one RD-curve SVG per sequence");
  ev->add_option("--anchor", ev_anchor, "anchor codec name for BD-rate");
  add_model_opts(ev, ev_mo);

  CLI11_PARSE(app, argc, argv);
  try {
    if (sch->parsed()) return cmd_schedule(ip, frames, views);
    if (syn->parsed())
      return cmd_synthesize(syn_in, syn_out, syn_views, syn_seed, syn_frames);
    if (enc->parsed())
      return cmd_encode(enc_mo, enc_in, enc_out, enc_views, enc_ip, enc_rate,
                        enc_frames, enc_yuv);
    if (dec->parsed())
      return cmd_decode(dec_mo, dec_in, dec_out, dec_from, dec_resilient);
    if (ext->parsed()) return cmd_extract_base(ext_in, ext_out);
    if (tr->parsed())
      return cmd_train(tr_mo, tr_target, tr_stage, tr_steps, tr_seed, tr_data, tr_out,
                       tr_crop, tr_batch, tr_lr, tr_rate, tr_views, tr_log);
    if (ev->parsed())
      return cmd_eval(ev_mo, ev_orig, ev_bs, ev_cfg, ev_csv, ev_plots, ev_anchor);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
