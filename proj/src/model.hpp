#pragma once

#include <map>
#include <string>

#include "lorentz/expr.hpp"
#include "lorentz/spacetime.hpp"

namespace lorentz {

class MetricModel {
 public:
  virtual ~MetricModel() = default;
  virtual int dim() const = 0;
  virtual SpecKind kind() const = 0;
  virtual std::string name() const = 0;
  virtual Mat metric(const Vec& x) const = 0;
  virtual bool closed_form_jet() const { return false; }
  // Only called when closed_form_jet() is true.
  virtual void jet(const Vec& /*x*/, bool /*second*/, MetricJet& /*out*/) const {}
  // Lines for the [model]/[params]/[lapse]/[spatial]/[metric] sections of the document.
  virtual std::string document_body(const std::map<std::string, double>& params) const = 0;
  // Canonical a(t) text for FLRW models, empty otherwise.
  virtual std::string scale_factor_text() const { return {}; }
};

}  // namespace lorentz
