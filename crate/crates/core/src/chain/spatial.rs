use nalgebra::{Isometry3, Matrix3, Matrix6, Vector3, Vector6};

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

/// Motion cross-product operator `m ×`.
pub(super) fn crm(m: &Vector6<f64>) -> Matrix6<f64> {
    let w = skew(&m.fixed_rows::<3>(0).into_owned());
    let v = skew(&m.fixed_rows::<3>(3).into_owned());
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&v);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    out
}

/// Force cross-product operator `m ×*`, equal to `-crm(m)ᵀ`.
pub(super) fn crf(m: &Vector6<f64>) -> Matrix6<f64> {
    let w = skew(&m.fixed_rows::<3>(0).into_owned());
    let v = skew(&m.fixed_rows::<3>(3).into_owned());
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&v);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    out
}

/// Spatial inertia about the base origin of a body placed at `frame`.
pub(super) fn spatial_inertia(
    frame: &Isometry3<f64>,
    mass: f64,
    com: &Vector3<f64>,
    inertia: &Matrix3<f64>,
) -> Matrix6<f64> {
    let r = frame.rotation.to_rotation_matrix();
    let c = frame * nalgebra::Point3::from(*com);
    let cx = skew(&c.coords);
    let ic = r.matrix() * inertia * r.matrix().transpose();
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(ic + mass * cx * cx.transpose()));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(mass * cx));
    out.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(mass * cx.transpose()));
    out.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Matrix3::identity() * mass));
    out
}
