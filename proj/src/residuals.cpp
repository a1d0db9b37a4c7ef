#include "ivpricing/residuals.hpp"

namespace ivpricing {

std::string_view component_name(int c) {
  static constexpr std::array<std::string_view, kAlphaDim> names = {"beta1", "beta2", "h1", "h2",
                                                                    "h3",    "h4",    "h5", "h6"};
  return names.at(static_cast<std::size_t>(c));
}

RhoVector eval_rho(const Observation& z, double h1, double h2) {
  const double common = (z.g - h1) * (z.p - h2);
  RhoVector rho;
  rho(0) = common * z.y;
  rho(1) = common * z.p;
  rho(2) = common * z.p * z.p;
  rho(3) = z.g * rho(0);
  rho(4) = z.g * rho(1);
  rho(5) = z.g * rho(2);
  return rho;
}

ResidualVector eval_W(const Observation& z, const AlphaValues& a) {
  const double e2 = z.p - a(kH2);
  const RhoVector rho = eval_rho(z, a(kH1), a(kH2));
  const double spread = a(kH3) - a(kH1) * a(kH1);

  ResidualVector w;
  w(0) = z.g - a(kH1);
  w(1) = e2;
  w(2) = z.g * z.g - a(kH3);
  w(3) = e2 * z.y - a(kH4);
  w(4) = z.p * e2 - a(kH5);
  w(5) = z.p * z.p * e2 - a(kH6);
  w(6) = rho(0) - rho(1) * a(kBeta1) - rho(2) * a(kBeta2);
  w(7) = rho(3) - spread * a(kH4) - (rho(4) - spread * a(kH5)) * a(kBeta1) -
         (rho(5) - spread * a(kH6)) * a(kBeta2);
  return w;
}

ResidualJacobian eval_W_jacobian(const Observation& z, const AlphaValues& a) {
  const double e1 = z.g - a(kH1);
  const double e2 = z.p - a(kH2);
  const double p2 = z.p * z.p;
  // w7 = e1 e2 r and w8 = G e1 e2 r - v q.
  const double r = z.y - a(kBeta1) * z.p - a(kBeta2) * p2;
  const double v = a(kH3) - a(kH1) * a(kH1);
  const double q = a(kH4) - a(kBeta1) * a(kH5) - a(kBeta2) * a(kH6);

  ResidualJacobian j = ResidualJacobian::Zero();
  j(0, kH1) = -1.0;
  j(1, kH2) = -1.0;
  j(2, kH3) = -1.0;
  j(3, kH2) = -z.y;
  j(3, kH4) = -1.0;
  j(4, kH2) = -z.p;
  j(4, kH5) = -1.0;
  j(5, kH2) = -p2;
  j(5, kH6) = -1.0;

  j(6, kH1) = -e2 * r;
  j(6, kH2) = -e1 * r;
  j(6, kBeta1) = -e1 * e2 * z.p;
  j(6, kBeta2) = -e1 * e2 * p2;

  j(7, kH1) = -z.g * e2 * r + 2.0 * a(kH1) * q;
  j(7, kH2) = -z.g * e1 * r;
  j(7, kH3) = -q;
  j(7, kH4) = -v;
  j(7, kH5) = v * a(kBeta1);
  j(7, kH6) = v * a(kBeta2);
  j(7, kBeta1) = -z.g * e1 * e2 * z.p + v * a(kH5);
  j(7, kBeta2) = -z.g * e1 * e2 * p2 + v * a(kH6);
  return j;
}

}  // namespace ivpricing
