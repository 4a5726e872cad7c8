//! Small fixed-size vector/matrix helpers and the axis-angle rotation
//! machinery shared by projection and fitting code.

pub type Vec2 = [f64; 2];
pub type Vec3 = [f64; 3];
/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn mat3_mul_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat3_transpose(m: &Mat3) -> Mat3 {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat3_identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat3_det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

// Rodrigues coefficients written against theta with series fallbacks below
// this threshold; the closed forms lose digits to cancellation as theta -> 0.
const SMALL_ANGLE: f64 = 1e-2;

struct RotCoeffs {
    /// cos(theta)
    c: f64,
    /// sin(theta)/theta
    a: f64,
    /// (1 - cos(theta))/theta^2
    b: f64,
    /// d(a)/d(theta) / theta = (cos(theta)*theta - sin(theta)) / theta^3
    da: f64,
    /// d(b)/d(theta) / theta = (sin(theta)*theta - 2(1-cos(theta))) / theta^4
    db: f64,
}

fn rot_coeffs(theta: f64) -> RotCoeffs {
    let t2 = theta * theta;
    if theta < SMALL_ANGLE {
        RotCoeffs {
            c: theta.cos(),
            a: 1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            b: 0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            da: -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0,
            db: -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0,
        }
    } else {
        let (s, c) = theta.sin_cos();
        let a = s / theta;
        RotCoeffs {
            c,
            a,
            b: (1.0 - c) / t2,
            da: (c * theta - s) / (t2 * theta),
            db: (s * theta - 2.0 * (1.0 - c)) / (t2 * t2),
        }
    }
}

/// Rotation matrix from an axis-angle vector (Rodrigues' formula).
///
/// R = cos(t) I + sin(t)/t [r]x + (1-cos(t))/t^2 r r^T, exact identity at r = 0.
pub fn rotation_matrix(axis_angle: Vec3) -> Mat3 {
    let r = axis_angle;
    let theta = norm3(r);
    let k = rot_coeffs(theta);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = k.b * r[i] * r[j];
        }
        m[i][i] += k.c;
    }
    // a * [r]x
    m[0][1] -= k.a * r[2];
    m[0][2] += k.a * r[1];
    m[1][0] += k.a * r[2];
    m[1][2] -= k.a * r[0];
    m[2][0] -= k.a * r[1];
    m[2][1] += k.a * r[0];
    m
}

/// Rotate a point by an axis-angle vector using the direct Rodrigues form
/// R v = c v + a (r x v) + b r (r.v).
///
/// All projection paths share this helper, so a loss evaluated on landmarks
/// generated through [`crate::geomfit::project`] is bitwise zero.
pub fn rotate(axis_angle: Vec3, v: Vec3) -> Vec3 {
    let r = axis_angle;
    let k = rot_coeffs(norm3(r));
    let rxv = cross3(r, v);
    let rv = dot3(r, v);
    [
        k.c * v[0] + k.a * rxv[0] + k.b * r[0] * rv,
        k.c * v[1] + k.a * rxv[1] + k.b * r[1] * rv,
        k.c * v[2] + k.a * rxv[2] + k.b * r[2] * rv,
    ]
}

/// Rotate `v` by the axis-angle vector and return the Jacobian of the rotated
/// point with respect to the axis-angle parameters.
///
/// Returns (R v, J) with J[i][j] = d(Rv)_i / d(r_j). The Jacobian is the
/// derivative of the Rodrigues form R v = c v + a (r x v) + b r (r.v); at
/// r = 0 it reduces to -[v]x.
pub fn rotate_with_jacobian(axis_angle: Vec3, v: Vec3) -> (Vec3, Mat3) {
    let r = axis_angle;
    let theta = norm3(r);
    let k = rot_coeffs(theta);
    let rxv = cross3(r, v);
    let rv = dot3(r, v);

    let rotated = rotate(axis_angle, v);

    // d(Rv)/dr = -a v r^T + da (r x v) r^T - a [v]x + db (r.v) r r^T
    //            + b (r.v) I + b r v^T
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            jac[i][j] = -k.a * v[i] * r[j]
                + k.da * rxv[i] * r[j]
                + k.db * rv * r[i] * r[j]
                + k.b * r[i] * v[j];
        }
        jac[i][i] += k.b * rv;
    }
    // -a [v]x
    jac[0][1] += k.a * v[2];
    jac[0][2] -= k.a * v[1];
    jac[1][0] -= k.a * v[2];
    jac[1][2] += k.a * v[0];
    jac[2][0] += k.a * v[1];
    jac[2][1] -= k.a * v[0];

    (rotated, jac)
}
