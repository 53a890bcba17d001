//! Pareto dominance, non-dominated filtering, reference fronts and the two
//! front-quality indicators (IGD and 2-D hypervolume).

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problems::{lookup_problem, ObjectiveVector};

/// `a ≺ b`: no worse in both objectives and strictly better in one.
#[inline]
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    a.f1() <= b.f1() && a.f2() <= b.f2() && (a.f1() < b.f1() || a.f2() < b.f2())
}

/// Indices of the points not dominated by any other point, ascending.
///
/// Sort-and-sweep, `O(n log n)`. Exact duplicates do not dominate each
/// other, so every copy of a non-dominated vector is kept.
pub fn nondominated_indices(points: &[ObjectiveVector]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .f1()
            .total_cmp(&points[b].f1())
            .then(points[a].f2().total_cmp(&points[b].f2()))
    });

    let mut keep = Vec::new();
    // smallest f2 among points with strictly smaller f1
    let mut best_f2 = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let f1 = points[order[i]].f1();
        let group_min = points[order[i]].f2();
        let mut j = i;
        while j < order.len() && points[order[j]].f1() == f1 {
            if points[order[j]].f2() == group_min && group_min < best_f2 {
                keep.push(order[j]);
            }
            j += 1;
        }
        best_f2 = best_f2.min(group_min);
        i = j;
    }
    keep.sort_unstable();
    keep
}

/// A set of objective vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Front {
    points: Vec<ObjectiveVector>,
}

impl Front {
    pub fn new(points: Vec<ObjectiveVector>) -> Self {
        Front { points }
    }

    pub fn points(&self) -> &[ObjectiveVector] {
        &self.points
    }

    pub fn into_points(self) -> Vec<ObjectiveVector> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_mutually_nondominated(&self) -> bool {
        self.points
            .iter()
            .all(|a| !self.points.iter().any(|b| dominates(b, a)))
    }

    /// Ascending by f1, ties by f2.
    pub fn sorted_by_f1(mut self) -> Self {
        self.points
            .sort_by(|a, b| a.f1().total_cmp(&b.f1()).then(a.f2().total_cmp(&b.f2())));
        self
    }
}

impl FromIterator<ObjectiveVector> for Front {
    fn from_iter<I: IntoIterator<Item = ObjectiveVector>>(iter: I) -> Self {
        Front::new(iter.into_iter().collect())
    }
}

/// Non-dominated subset of `points`, in first-occurrence order.
pub fn nondominated_filter(points: &[ObjectiveVector]) -> Front {
    nondominated_indices(points)
        .into_iter()
        .map(|i| points[i])
        .collect()
}

/// Mean distance from each reference point to its nearest estimate point.
pub fn igd(estimate: &Front, reference: &Front) -> Result<f64> {
    if estimate.is_empty() || reference.is_empty() {
        return Err(Error::InvalidInput(
            "IGD needs non-empty estimate and reference fronts".into(),
        ));
    }
    let total: f64 = reference
        .points()
        .iter()
        .map(|r| {
            estimate
                .points()
                .iter()
                .map(|e| r.distance(e))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / reference.len() as f64)
}

/// Area dominated by `front` and bounded by `ref_point`.
pub fn hypervolume_2d(front: &Front, ref_point: ObjectiveVector) -> Result<f64> {
    if let Some(p) = front
        .points()
        .iter()
        .find(|p| !(p.f1() < ref_point.f1() && p.f2() < ref_point.f2()))
    {
        return Err(Error::InvalidInput(format!(
            "point ({}, {}) does not dominate reference point ({}, {})",
            p.f1(),
            p.f2(),
            ref_point.f1(),
            ref_point.f2()
        )));
    }
    let sorted = front.clone().sorted_by_f1();
    let mut ceiling = ref_point.f2();
    let mut area = 0.0;
    for p in sorted.points() {
        if p.f2() < ceiling {
            area += (ref_point.f1() - p.f1()) * (ceiling - p.f2());
            ceiling = p.f2();
        }
    }
    Ok(area)
}

/// Reference Pareto front for a registered benchmark, sorted ascending by f1.
///
/// * `convex`: `(50t², 50(1−t)²)` for `t` equally spaced on `[0, 1]`.
/// * `fonseca`: image of `x1 = x2 = t`, `t` equally spaced on `[−1/√2, 1/√2]`.
/// * `kursawe`: non-dominated subset of a `resolution³` grid over `[−5, 5]³`.
pub fn reference_front(name: &str, resolution: usize) -> Result<Front> {
    let problem = lookup_problem(name)?;
    if resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "reference resolution must be at least 2, got {resolution}"
        )));
    }
    let steps = (resolution - 1) as f64;
    let front = match name {
        "convex" => (0..resolution)
            .map(|i| {
                let t = i as f64 / steps;
                ObjectiveVector::new(50.0 * t * t, 50.0 * (1.0 - t) * (1.0 - t))
            })
            .collect(),
        "fonseca" => (0..resolution)
            .map(|i| {
                let t = -FRAC_1_SQRT_2 + 2.0 * FRAC_1_SQRT_2 * i as f64 / steps;
                problem.objectives_uncounted(&[t, t])
            })
            .collect(),
        "kursawe" => {
            let axis: Vec<f64> = (0..resolution)
                .map(|i| -5.0 + 10.0 * i as f64 / steps)
                .collect();
            // Filter each x1-slab independently, then filter the union.
            let partial: Vec<ObjectiveVector> = axis
                .par_iter()
                .flat_map_iter(|&x1| {
                    let mut slab = Vec::with_capacity(resolution * resolution);
                    for &x2 in &axis {
                        for &x3 in &axis {
                            slab.push(problem.objectives_uncounted(&[x1, x2, x3]));
                        }
                    }
                    nondominated_filter(&slab).into_points()
                })
                .collect();
            nondominated_filter(&partial)
        }
        _ => unreachable!("lookup_problem accepted `{name}`"),
    };
    Ok(front.sorted_by_f1())
}

/// Resolution used when scoring runs on each benchmark.
pub fn default_reference_resolution(problem: &str) -> usize {
    match problem {
        "convex" => 100,
        "fonseca" => 200,
        _ => 201,
    }
}

/// Hypervolume reference point used when scoring runs on each benchmark.
pub fn default_hypervolume_ref(problem: &str) -> ObjectiveVector {
    match problem {
        "convex" => ObjectiveVector::new(55.0, 55.0),
        "fonseca" => ObjectiveVector::new(1.1, 1.1),
        _ => ObjectiveVector::new(-14.0, 1.0),
    }
}

/// Writes `f1,f2` CSV with shortest round-trip decimals, sorted by f1.
pub fn write_front_csv(front: &Front, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut out = String::from("f1,f2\n");
    for p in front.clone().sorted_by_f1().points() {
        out.push_str(&format!("{},{}\n", p.f1(), p.f2()));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_front_csv(path: &Path) -> Result<Front> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "f1,f2")) => {}
        _ => return Err(parse_err(1, "expected header `f1,f2`")),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| parse_err(i + 1, "expected two columns"))?;
        let f1 = a.parse().map_err(|_| parse_err(i + 1, "bad f1 value"))?;
        let f2 = b.parse().map_err(|_| parse_err(i + 1, "bad f2 value"))?;
        points.push(ObjectiveVector::new(f1, f2));
    }
    Ok(Front::new(points))
}

/// Memoizes reference fronts in memory and, when a directory is set, as
/// `<name>_<resolution>.csv` files under it.
#[derive(Debug, Default)]
pub struct ReferenceStore {
    dir: Option<PathBuf>,
    memo: Mutex<HashMap<(String, usize), Front>>,
}

impl ReferenceStore {
    pub fn in_memory() -> Self {
        ReferenceStore::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        ReferenceStore {
            dir: Some(dir.into()),
            memo: Mutex::default(),
        }
    }

    /// Process-wide in-memory store.
    pub fn shared() -> &'static ReferenceStore {
        static STORE: OnceLock<ReferenceStore> = OnceLock::new();
        STORE.get_or_init(ReferenceStore::in_memory)
    }

    pub fn path_for(&self, name: &str, resolution: usize) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{name}_{resolution}.csv")))
    }

    pub fn get(&self, name: &str, resolution: usize) -> Result<Front> {
        let key = (name.to_string(), resolution);
        if let Some(f) = self.memo.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let front = match self.path_for(name, resolution) {
            Some(path) if path.exists() => read_front_csv(&path)?,
            Some(path) => {
                let f = reference_front(name, resolution)?;
                write_front_csv(&f, &path)?;
                f
            }
            None => reference_front(name, resolution)?,
        };
        self.memo.lock().unwrap().insert(key, front.clone());
        Ok(front)
    }

    /// Recomputes and overwrites the cached file (if any).
    pub fn regenerate(&self, name: &str, resolution: usize) -> Result<Front> {
        let front = reference_front(name, resolution)?;
        if let Some(path) = self.path_for(name, resolution) {
            write_front_csv(&front, &path)?;
        }
        self.memo
            .lock()
            .unwrap()
            .insert((name.to_string(), resolution), front.clone());
        Ok(front)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ov(f1: f64, f2: f64) -> ObjectiveVector {
        ObjectiveVector::new(f1, f2)
    }

    fn brute_force(points: &[ObjectiveVector]) -> Vec<ObjectiveVector> {
        points
            .iter()
            .filter(|p| !points.iter().any(|q| dominates(q, p)))
            .copied()
            .collect()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&ov(1.0, 2.0), &ov(2.0, 3.0)));
        assert!(!dominates(&ov(1.0, 2.0), &ov(1.0, 2.0)));
        assert!(!dominates(&ov(1.0, 3.0), &ov(3.0, 1.0)));
        assert!(!dominates(&ov(3.0, 1.0), &ov(1.0, 3.0)));
        assert!(dominates(&ov(1.0, 2.0), &ov(1.0, 3.0)));
    }

    #[test]
    fn filter_examples() {
        let pts = [ov(0.0, 2.0), ov(2.0, 0.0), ov(1.0, 1.0), ov(2.0, 2.0)];
        assert_eq!(
            nondominated_filter(&pts).points(),
            &[ov(0.0, 2.0), ov(2.0, 0.0), ov(1.0, 1.0)]
        );
        assert!(nondominated_filter(&[]).is_empty());
        let same = [ov(1.0, 1.0); 4];
        assert_eq!(nondominated_filter(&same).len(), 4);
    }

    #[test]
    fn igd_examples() {
        let r = Front::new(vec![ov(0.0, 0.0), ov(2.0, 0.0)]);
        assert_eq!(igd(&r, &r).unwrap(), 0.0);
        assert_eq!(
            igd(
                &Front::new(vec![ov(3.0, 4.0)]),
                &Front::new(vec![ov(0.0, 0.0)])
            )
            .unwrap(),
            5.0
        );
        assert_eq!(igd(&Front::new(vec![ov(0.0, 0.0)]), &r).unwrap(), 1.0);
        assert!(matches!(
            igd(&Front::default(), &r),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            igd(&r, &Front::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn hypervolume_examples() {
        let unit = ov(1.0, 1.0);
        assert_eq!(
            hypervolume_2d(&Front::new(vec![ov(0.0, 0.0)]), unit).unwrap(),
            1.0
        );
        assert_eq!(
            hypervolume_2d(&Front::new(vec![ov(0.0, 0.5), ov(0.5, 0.0)]), unit).unwrap(),
            0.75
        );
        assert_eq!(hypervolume_2d(&Front::default(), unit).unwrap(), 0.0);
        let err = hypervolume_2d(&Front::new(vec![ov(0.0, 1.0)]), unit).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }

    #[test]
    fn convex_reference() {
        let f = reference_front("convex", 3).unwrap();
        assert_eq!(f.points(), &[ov(0.0, 50.0), ov(12.5, 12.5), ov(50.0, 0.0)]);
        for p in reference_front("convex", 100).unwrap().points() {
            let s = (p.f1() / 50.0).sqrt() + (p.f2() / 50.0).sqrt();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fonseca_reference_endpoints() {
        let f = reference_front("fonseca", 200).unwrap();
        let first = f.points()[0];
        let last = *f.points().last().unwrap();
        let far = 1.0 - (-4.0f64).exp();
        assert!(first.f1().abs() < 1e-15 && (first.f2() - far).abs() < 1e-12);
        assert!((last.f1() - far).abs() < 1e-12 && last.f2().abs() < 1e-15);
        assert!(f.is_mutually_nondominated());
    }

    #[test]
    fn unknown_reference() {
        assert!(matches!(
            reference_front("zdt1", 10),
            Err(Error::NotFound { .. })
        ));
        assert!(matches!(
            reference_front("convex", 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn small_kursawe_reference_matches_brute_force() {
        let p = lookup_problem("kursawe").unwrap();
        let n = 15;
        let axis: Vec<f64> = (0..n)
            .map(|i| -5.0 + 10.0 * i as f64 / (n - 1) as f64)
            .collect();
        let mut all = Vec::new();
        for &a in &axis {
            for &b in &axis {
                for &c in &axis {
                    all.push(p.objectives_uncounted(&[a, b, c]));
                }
            }
        }
        let expected = Front::new(brute_force(&all)).sorted_by_f1();
        assert_eq!(reference_front("kursawe", n).unwrap(), expected);
    }

    #[test]
    fn csv_round_trip_and_store() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReferenceStore::with_dir(dir.path());
        let f = store.get("fonseca", 50).unwrap();
        let path = store.path_for("fonseca", 50).unwrap();
        assert!(path.exists());
        assert_eq!(read_front_csv(&path).unwrap(), f);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("f1,f2\n"));
        // a second store reads the cached file back bit-exactly
        assert_eq!(
            ReferenceStore::with_dir(dir.path())
                .get("fonseca", 50)
                .unwrap(),
            f
        );
    }

    #[test]
    fn csv_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x,y\n1,2\n").unwrap();
        assert!(matches!(read_front_csv(&path), Err(Error::Parse { .. })));
        fs::write(&path, "f1,f2\n1;2\n").unwrap();
        assert!(matches!(read_front_csv(&path), Err(Error::Parse { .. })));
    }

    fn point_set() -> impl Strategy<Value = Vec<ObjectiveVector>> {
        // small integer grid so ties and duplicates are frequent
        prop::collection::vec((0i32..8, 0i32..8), 0..64)
            .prop_map(|v| v.into_iter().map(|(a, b)| ov(a as f64, b as f64)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn filter_matches_brute_force(points in point_set()) {
            prop_assert_eq!(nondominated_filter(&points).into_points(), brute_force(&points));
        }

        #[test]
        fn filter_is_idempotent(points in point_set()) {
            let once = nondominated_filter(&points);
            prop_assert_eq!(nondominated_filter(once.points()), once);
        }

        #[test]
        fn dominance_axioms(
            a in (-5.0f64..5.0, -5.0f64..5.0),
            b in (-5.0f64..5.0, -5.0f64..5.0),
            c in (-5.0f64..5.0, -5.0f64..5.0),
        ) {
            let (a, b, c) = (ov(a.0, a.1), ov(b.0, b.1), ov(c.0, c.1));
            prop_assert!(!dominates(&a, &a));
            prop_assert!(!(dominates(&a, &b) && dominates(&b, &a)));
            if dominates(&a, &b) && dominates(&b, &c) {
                prop_assert!(dominates(&a, &c));
            }
        }

        #[test]
        fn igd_zero_iff_reference_covered(
            reference in prop::collection::vec((0i32..6, 0i32..6), 1..10),
            extra in prop::collection::vec((0i32..6, 0i32..6), 0..10),
        ) {
            let r: Front = reference.iter().map(|&(a, b)| ov(a as f64, b as f64)).collect();
            let e: Front = extra.iter().map(|&(a, b)| ov(a as f64, b as f64)).collect();
            let mut union = e.points().to_vec();
            union.extend_from_slice(r.points());
            prop_assert_eq!(igd(&Front::new(union), &r).unwrap(), 0.0);
            if !e.is_empty() {
                let covered = r.points().iter().all(|p| e.points().contains(p));
                prop_assert_eq!(igd(&e, &r).unwrap() == 0.0, covered);
            }
        }

        #[test]
        fn hypervolume_monotone(
            points in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 0..20),
            extra in (0.0f64..10.0, 0.0f64..10.0),
        ) {
            let r = ov(10.5, 10.5);
            let base = nondominated_filter(
                &points.iter().map(|&(a, b)| ov(a, b)).collect::<Vec<_>>(),
            );
            let x = ov(extra.0, extra.1);
            prop_assume!(!base.points().iter().any(|p| dominates(p, &x)));
            let mut grown = base.points().to_vec();
            grown.push(x);
            prop_assert!(
                hypervolume_2d(&Front::new(grown), r).unwrap()
                    >= hypervolume_2d(&base, r).unwrap() - 1e-12
            );
        }
    }
}
