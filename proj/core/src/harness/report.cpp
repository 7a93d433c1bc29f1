#include "thermocad/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"
#include "thermocad/harness/svg.hpp"

namespace thermocad::harness {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& out) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(Errc::IoError, "cannot write " + path.string());
  f << text;
  if (!f) raise(Errc::IoError, "write failed for " + path.string());
  out.push_back(path);
}

}  // namespace

std::string metrics_csv(const RunReport& report) {
  std::string out = metrics::csv_header() + "\n";
  for (const auto& row : report.rows) {
    if (row.failed) {
      out += row.model_id + ",,,,,,0,,,failed\n";
    } else {
      out += metrics::csv_row(row.metrics) + "\n";
    }
  }
  return out;
}

std::string history_csv(const RunReport& report) {
  std::string out = "model_id,epoch,train_loss,val_loss,val_accuracy,learning_rate,seconds\n";
  for (const auto& row : report.rows) {
    for (std::size_t e = 0; e < row.history.epochs.size(); ++e) {
      const auto& r = row.history.epochs[e];
      out += row.model_id + "," + std::to_string(e + 1) + "," + fmt(r.train_loss) + "," + fmt(r.val_loss) + "," +
             fmt(r.val_accuracy) + "," + fmt(r.learning_rate) + "," + fmt(r.seconds) + "\n";
    }
  }
  return out;
}

std::string size_study_csv(const RunReport& report) {
  std::string out = "size,augmented,runs,accuracy,precision,sensitivity,f1\n";
  for (const auto& c : report.size_cells) {
    out += std::to_string(c.size) + "," + (c.augmented ? "yes" : "no") + "," + std::to_string(c.runs) + "," +
           fmt(c.accuracy) + "," + fmt(c.precision) + "," + fmt(c.sensitivity) + "," + fmt(c.f1) + "\n";
  }
  return out;
}

std::string report_json(const RunReport& report) {
  nlohmann::json j;
  j["experiment"] = std::string(to_string(report.experiment));
  j["config"] = nlohmann::json::parse(report.config_json);
  j["splits"] = nlohmann::json::array();
  for (const auto& s : report.splits) j["splits"].push_back(nlohmann::json::parse(split::split_to_json(s)));
  j["runs"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r{{"model_id", row.model_id},
                     {"approach", std::string(split::to_string(row.approach))},
                     {"augmented", row.augmented},
                     {"split_seed", row.split_seed},
                     {"model_seed", row.model_seed},
                     {"hyperparams", nlohmann::json::parse(row.hp.to_json())},
                     {"status", row.failed ? "failed" : "ok"}};
    if (row.fold >= 0) {
      r["fold"] = row.fold;
      r["size"] = row.size;
    }
    if (row.failed) {
      r["error"] = row.error;
    } else {
      r["metrics"] = nlohmann::json::parse(metrics::to_json(row.metrics));
      r["best_epoch"] = row.history.best_epoch;
      r["stopped_epoch"] = row.history.stopped_epoch;
      if (!row.weights_path.empty()) r["weights"] = row.weights_path.string();
    }
    j["runs"].push_back(r);
  }
  if (report.trials) {
    j["trials"] = nlohmann::json::array();
    for (const auto& t : report.trials->trials) j["trials"].push_back(nlohmann::json::parse(t.to_json_line()));
  }
  j["best_model"] = report.best_row ? nlohmann::json(report.rows[*report.best_row].model_id) : nlohmann::json(nullptr);
  return j.dump(2);
}

std::vector<std::filesystem::path> render_report(const RunReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  write_file(out_dir / "metrics.csv", metrics_csv(report), written);
  write_file(out_dir / "history.csv", history_csv(report), written);
  write_file(out_dir / "report.json", report_json(report), written);
  if (report.experiment == ExperimentKind::SizeStudy) {
    write_file(out_dir / "size_study.csv", size_study_csv(report), written);
  }

  std::vector<const RunRow*> ok;
  for (const auto& row : report.rows) {
    if (!row.failed) ok.push_back(&row);
  }
  if (ok.empty()) return written;

  std::vector<svg::Series> acc, loss;
  for (const RunRow* row : ok) {
    svg::Series a{row->model_id, {}, {}}, l{row->model_id, {}, {}};
    for (std::size_t e = 0; e < row->history.epochs.size(); ++e) {
      a.x.push_back(static_cast<double>(e + 1));
      a.y.push_back(row->history.epochs[e].val_accuracy);
      l.x.push_back(static_cast<double>(e + 1));
      l.y.push_back(row->history.epochs[e].val_loss);
    }
    acc.push_back(std::move(a));
    loss.push_back(std::move(l));
  }
  write_file(out_dir / "val_accuracy.svg", svg::line_chart("Validation accuracy", "epoch", "accuracy", acc), written);
  write_file(out_dir / "val_loss.svg", svg::line_chart("Validation loss", "epoch", "loss", loss), written);

  std::vector<std::pair<std::string, std::vector<double>>> groups{
      {"accuracy", {}}, {"precision", {}}, {"sensitivity", {}}, {"f1", {}}, {"roc_auc", {}}};
  for (const RunRow* row : ok) {
    groups[0].second.push_back(row->metrics.accuracy);
    groups[1].second.push_back(row->metrics.precision);
    groups[2].second.push_back(row->metrics.sensitivity);
    groups[3].second.push_back(row->metrics.f1);
    groups[4].second.push_back(row->metrics.roc_auc);
  }
  write_file(out_dir / "metrics_box.svg", svg::box_plot("Test metrics across models", "value", groups), written);

  if (report.experiment == ExperimentKind::SizeStudy && !report.size_cells.empty()) {
    const std::pair<const char*, double SizeCell::*> fields[] = {{"accuracy", &SizeCell::accuracy},
                                                                  {"precision", &SizeCell::precision},
                                                                  {"sensitivity", &SizeCell::sensitivity},
                                                                  {"f1", &SizeCell::f1}};
    for (const auto& [name, member] : fields) {
      svg::Series aug{"augmented", {}, {}}, plain{"not augmented", {}, {}};
      for (const auto& c : report.size_cells) {
        if (c.runs == 0) continue;
        auto& s = c.augmented ? aug : plain;
        s.x.push_back(c.size);
        s.y.push_back(c.*member);
      }
      write_file(out_dir / ("size_" + std::string(name) + ".svg"),
                 svg::line_chart(std::string("Mean ") + name + " by training patients", "patients", name,
                                 {plain, aug}),
                 written);
    }
  }
  return written;
}

}  // namespace thermocad::harness
