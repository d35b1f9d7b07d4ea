//! Execution mode for data-parallel loops.
//!
//! Every parallel loop in the crate goes through [`Exec::map`], which
//! returns results in index order. Reductions are then done sequentially
//! by the caller, so floating-point results do not depend on the schedule.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    /// Rayon when the `parallel` feature is on, otherwise sequential.
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel => par_map(n, f),
        }
    }

    /// Maps over chunks `[start, end)` of `0..n`, returning per-chunk results in order.
    pub fn map_chunks<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let nchunks = n.div_ceil(chunk);
        self.map(nchunks, |c| f(c * chunk, ((c + 1) * chunk).min(n)))
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = Exec::Parallel.map(1000, |i| (i as f64).sqrt());
        let b = Exec::Sequential.map(1000, |i| (i as f64).sqrt());
        assert_eq!(a, b);
        let c = Exec::Parallel.map_chunks(1003, 100, |s, e| e - s);
        assert_eq!(c.iter().sum::<usize>(), 1003);
        assert_eq!(c.len(), 11);
    }
}
