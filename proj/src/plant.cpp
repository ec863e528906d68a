#include "dobkit/plant.hpp"

namespace dobkit {

PlantModel make_one_dof_plant(const OneDofParams& p, double dt) {
    p.validate();
    PlantModel model;
    model.dist_dim = 1;
    model.state_dim = 2;
    model.dt = dt;
    model.H = Mat::Zero(1, 3);
    model.H(0, 2) = 1.0;  // angle-only measurement
    model.step = [p, dt](const Vec& x, const Vec& u) { return one_dof_transition(x, u(0), dt, p); };
    return model;
}

PlantModel make_exo_plant(const TwoLinkParams& p, double dt) {
    p.validate();
    PlantModel model;
    model.dist_dim = 2;
    model.state_dim = 4;
    model.dt = dt;
    model.H = Mat::Zero(4, 6);
    model.H.rightCols<4>().setIdentity();  // angles and velocities measured
    model.step = [p, dt](const Vec& x, const Vec& u) {
        return exo_transition(x, Vec2(u(0), u(1)), dt, p);
    };
    return model;
}

}  // namespace dobkit
