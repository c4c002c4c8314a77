#include "biasaware/serialize.hpp"

#include "biasaware/errors.hpp"

#include <cmath>
#include <cstdio>

namespace biasaware {

namespace {

void write(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        write(it.value(), out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        write(j[i], out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
      }
      break;
    }
    default:
      out += j.dump();
  }
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  write(j, out);
  return out;
}

Json envelope(const std::string& command) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  return j;
}

Json to_json(const InferenceReport& r) {
  Json j;
  j["criterion"] = std::string(to_string(r.criterion));
  j["beta_hat"] = number(r.beta_hat);
  j["ci_lo"] = number(r.ci_lo);
  j["ci_hi"] = number(r.ci_hi);
  j["half_length"] = number(0.5 * (r.ci_hi - r.ci_lo));
  j["maxbias"] = number(r.maxbias);
  j["bbar"] = number(r.bbar);
  j["sd_used"] = number(r.sd_used);
  j["sd_homo"] = number(r.sd_homo);
  j["sd_robust"] = number(r.sd_robust);
  j["variance_mode"] = r.variance_mode;
  j["cv"] = number(r.cv);
  j["lambda"] = number(r.lambda_chosen);
  j["t_lambda"] = number(r.t_chosen);
  j["lindeberg"] = number(r.lind);
  j["sigma2"] = number(r.sigma2);
  j["C"] = number(r.C);
  j["alpha"] = number(r.alpha);
  return j;
}

Json to_json(const SensitivityRow& r) {
  Json j;
  j["C"] = number(r.C);
  j["excludes_null"] = r.excludes_null;
  j["flci"] = to_json(r.flci);
  return j;
}

Json to_json(const Breakdown& b) {
  Json j;
  j["breakdown_C"] = b.c_star ? number(*b.c_star) : Json("none");
  Json rows = Json::array();
  for (const auto& r : b.rows) rows.push_back(to_json(r));
  j["rows"] = std::move(rows);
  return j;
}

Json to_json(const CLowerCI& c) {
  Json j;
  j["c_hat"] = number(c.c_hat);
  j["lambda_star_alpha"] = number(c.lambda_star_alpha);
  j["mode"] = std::string(to_string(c.mode));
  j["alpha"] = number(c.alpha);
  return j;
}

Json to_json(const EfficiencyReport& e) {
  Json j;
  j["kappa_flci"] = number(e.kappa_flci);
  j["kappa_mse_lo"] = number(e.kappa_mse_lo);
  j["kappa_mse_hi"] = number(e.kappa_mse_hi);
  j["alpha"] = number(e.alpha);
  j["sigma"] = number(e.sigma);
  j["extension_mass"] = number(e.extension_mass);
  j["extension_flag"] = e.extension_flag;
  j["samples_used"] = e.samples_used;
  Json m = Json::array();
  for (const auto& p : e.modulus_samples) {
    Json row;
    row["delta"] = number(p.delta);
    row["omega"] = number(p.omega);
    row["omega_prime"] = number(p.omega_prime);
    m.push_back(std::move(row));
  }
  j["modulus"] = std::move(m);
  return j;
}

Json to_json(const CoverageSummary& s) {
  Json j;
  j["reps"] = s.reps;
  j["alpha"] = number(s.alpha);
  j["C_assumed"] = number(s.C_assumed);
  j["beta_true"] = number(s.beta_true);
  j["pen_gamma2"] = number(s.pen_gamma2);
  j["coverage"] = number(s.coverage);
  j["mc_se"] = number(s.mc_se);
  j["mean_length"] = number(s.mean_length);
  if (s.has_zz) {
    j["zz_coverage"] = number(s.zz_coverage);
    j["zz_mc_se"] = number(s.zz_mc_se);
    j["zz_mean_length"] = number(s.zz_mean_length);
  }
  return j;
}

Json to_json(const RateCell& c) {
  Json j;
  j["n"] = c.n;
  j["k2"] = c.k2;
  j["rate"] = number(c.rate);
  j["mean_length"] = number(c.mean_length);
  j["se_length"] = number(c.se_length);
  j["reps"] = c.reps;
  return j;
}

Json to_json(const LowerCSummary& s) {
  Json j;
  j["reps"] = s.reps;
  j["alpha"] = number(s.alpha);
  j["lambda_star"] = number(s.lambda_star);
  j["positive_rate"] = number(s.positive_rate);
  j["mc_se"] = number(s.mc_se);
  j["event_count"] = s.event_count;
  j["basic_inequality_failures"] = s.basic_inequality_failures;
  return j;
}

Json to_json(const DoubleLassoResult& d) {
  Json j;
  j["beta_zz"] = number(d.beta_zz);
  j["ci_lo"] = number(d.ci_lo);
  j["ci_hi"] = number(d.ci_hi);
  j["beta_lasso"] = number(d.beta_lasso);
  j["sd"] = number(d.sd);
  return j;
}

Json r2_curve_json(const std::vector<std::pair<double, double>>& curve) {
  Json rows = Json::array();
  for (const auto& [c, r2] : curve) {
    Json row;
    row["C"] = number(c);
    row["r2"] = number(r2);
    rows.push_back(std::move(row));
  }
  return rows;
}

Json error_json(ErrorKind kind, const std::string& message) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["error"] = std::string(to_string(kind));
  j["validation"] = is_validation_error(kind);
  j["message"] = message;
  return j;
}

}  // namespace biasaware
