//! Incremental 2D linear programming over half-planes inside a disc, as used
//! by reciprocal velocity obstacles.
//!
//! A constraint line is valid on the left (counter-clockwise) side of its
//! direction. The solver finds the point closest to a preferred point (or
//! furthest along a direction) that satisfies every constraint and lies
//! within the speed disc. When the constraints are jointly infeasible, the
//! fallback program returns the point that minimises the largest violation.

use crate::geometry::Vec2;

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: Vec2,
    /// Unit length.
    pub direction: Vec2,
}

impl Line {
    /// Signed violation of `v`; positive when `v` lies on the invalid side.
    pub fn violation(&self, v: Vec2) -> f64 {
        self.direction.det(self.point - v)
    }
}

#[derive(Debug, Clone, Copy)]
enum Objective {
    Point(Vec2),
    /// Unit direction to push as far as possible.
    Direction(Vec2),
}

/// Solves the program, falling back to the least-violating velocity when the
/// half-planes have an empty intersection inside the disc.
pub fn solve(lines: &[Line], radius: f64, preferred: Vec2) -> Vec2 {
    let objective = Objective::Point(preferred);
    let mut result = initial_point(radius, objective);
    match solve_2d(lines, radius, objective, &mut result) {
        None => result,
        Some(failed) => solve_fallback(lines, failed, radius, result),
    }
}

fn initial_point(radius: f64, objective: Objective) -> Vec2 {
    match objective {
        Objective::Direction(d) => d * radius,
        Objective::Point(p) if p.norm_sq() > radius * radius => p.normalized() * radius,
        Objective::Point(p) => p,
    }
}

/// Optimises along `lines[index]`, honouring `lines[..index]` and the disc.
fn solve_on_line(lines: &[Line], index: usize, radius: f64, objective: Objective) -> Option<Vec2> {
    let line = lines[index];
    let along = line.point.dot(line.direction);
    let discriminant = along * along + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        return None;
    }
    let root = discriminant.sqrt();
    let mut t_left = -along - root;
    let mut t_right = -along + root;

    for other in &lines[..index] {
        let denominator = line.direction.det(other.direction);
        let numerator = other.direction.det(line.point - other.point);
        if denominator.abs() <= EPS {
            if numerator < 0.0 {
                return None;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return None;
        }
    }

    let t = match objective {
        Objective::Direction(d) => {
            let along_dir = d.dot(line.direction);
            if along_dir > 0.0 {
                t_right
            } else if along_dir < 0.0 {
                t_left
            } else {
                // Both ends are equally good: smaller x, then smaller y.
                let left = line.point + line.direction * t_left;
                let right = line.point + line.direction * t_right;
                if (left.x, left.y) <= (right.x, right.y) {
                    t_left
                } else {
                    t_right
                }
            }
        }
        Objective::Point(p) => line.direction.dot(p - line.point).clamp(t_left, t_right),
    };
    Some(line.point + line.direction * t)
}

/// Returns `None` on success, or the index of the first line that could not
/// be satisfied. `result` holds the best point found so far either way.
fn solve_2d(lines: &[Line], radius: f64, objective: Objective, result: &mut Vec2) -> Option<usize> {
    *result = initial_point(radius, objective);
    for i in 0..lines.len() {
        if lines[i].violation(*result) > 0.0 {
            match solve_on_line(lines, i, radius, objective) {
                Some(v) => *result = v,
                None => return Some(i),
            }
        }
    }
    None
}

fn solve_fallback(lines: &[Line], begin: usize, radius: f64, mut result: Vec2) -> Vec2 {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if lines[i].violation(result) <= distance {
            continue;
        }
        let current = lines[i];
        let mut projected = Vec::with_capacity(i);
        for previous in &lines[..i] {
            let determinant = current.direction.det(previous.direction);
            let point = if determinant.abs() <= EPS {
                if current.direction.dot(previous.direction) > 0.0 {
                    continue;
                }
                (current.point + previous.point) * 0.5
            } else {
                let t = previous.direction.det(current.point - previous.point) / determinant;
                current.point + current.direction * t
            };
            projected.push(Line {
                point,
                direction: (previous.direction - current.direction).normalized(),
            });
        }
        let objective = Objective::Direction(Vec2::new(-current.direction.y, current.direction.x));
        let mut candidate = result;
        if solve_2d(&projected, radius, objective, &mut candidate).is_none() {
            result = candidate;
        }
        distance = current.violation(result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(px: f64, py: f64, dx: f64, dy: f64) -> Line {
        Line {
            point: Vec2::new(px, py),
            direction: Vec2::new(dx, dy).normalized(),
        }
    }

    #[test]
    fn unconstrained_returns_preferred_inside_disc() {
        assert_eq!(solve(&[], 2.0, Vec2::new(0.5, 0.5)), Vec2::new(0.5, 0.5));
    }

    #[test]
    fn unconstrained_clamps_to_disc() {
        let v = solve(&[], 1.0, Vec2::new(3.0, 0.0));
        assert!((v.x - 1.0).abs() < 1e-12 && v.y.abs() < 1e-12);
    }

    #[test]
    fn single_half_plane_projects() {
        // Valid side of a line pointing +y through x = 0.5 is x <= 0.5.
        let v = solve(&[line(0.5, 0.0, 0.0, 1.0)], 2.0, Vec2::new(1.0, 0.3));
        assert!((v.x - 0.5).abs() < 1e-12);
        assert!((v.y - 0.3).abs() < 1e-12);
    }

    #[test]
    fn infeasible_pair_balances_violation() {
        // x <= -0.5 and x >= 0.5 cannot both hold; least violation is x = 0.
        let lines = [line(-0.5, 0.0, 0.0, 1.0), line(0.5, 0.0, 0.0, -1.0)];
        let v = solve(&lines, 2.0, Vec2::new(1.0, 0.0));
        assert!(v.x.abs() < 1e-9, "{v:?}");
        for l in &lines {
            assert!((l.violation(v) - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn feasible_result_satisfies_all_lines() {
        let lines = [
            line(0.3, 0.0, 0.0, 1.0),
            line(0.0, 0.2, -1.0, 0.0),
            line(-0.4, -0.4, 1.0, -1.0),
        ];
        let v = solve(&lines, 1.5, Vec2::new(1.0, 1.0));
        for l in &lines {
            assert!(l.violation(v) <= 1e-9, "{l:?} {v:?}");
        }
        assert!(v.norm() <= 1.5 + 1e-9);
    }
}
