//! Order-preserving parallel map. With the `parallel` feature the items run
//! on a rayon pool of the requested size; without it, or with one job, they
//! run in order on the calling thread. Results always come back in input
//! order, so callers see the same output for any job count.

/// Maps `f` over `items` with up to `jobs` workers. `sink` receives every
/// result on the calling thread as soon as it is ready, in completion order,
/// and is the natural place for a single writer.
pub fn map_with_sink<T, R, F, S>(items: &[T], jobs: usize, f: F, sink: S) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    S: FnMut(usize, &R),
{
    if jobs <= 1 || items.len() <= 1 {
        return sequential(items, f, sink);
    }
    #[cfg(feature = "parallel")]
    {
        let mut sink = sink;
        parallel(items, jobs, f, &mut sink)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sequential(items, f, sink)
    }
}

/// [`map_with_sink`] without a sink.
pub fn map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_with_sink(items, jobs, f, |_, _| {})
}

/// Whether this build can run more than one worker.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

fn sequential<T, R, F, S>(items: &[T], f: F, mut sink: S) -> Vec<R>
where
    F: Fn(&T) -> R,
    S: FnMut(usize, &R),
{
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let r = f(item);
            sink(i, &r);
            r
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn parallel<T, R, F, S>(items: &[T], jobs: usize, f: F, sink: &mut S) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    S: FnMut(usize, &R),
{
    use rayon::prelude::*;
    use std::sync::mpsc;

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool,
        Err(_) => return sequential(items, f, sink),
    };
    let (tx, rx) = mpsc::channel::<(usize, R)>();
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        scope.spawn(move || {
            pool.install(|| {
                items.par_iter().enumerate().for_each_with(tx, |tx, (i, item)| {
                    // the receiver outlives the pool, so sending cannot fail
                    let _ = tx.send((i, f(item)));
                });
            });
        });
        for (i, r) in rx {
            sink(i, &r);
            slots[i] = Some(r);
        }
    });
    slots.into_iter().map(|r| r.expect("every item produced a result")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_for_any_job_count() {
        let items: Vec<u64> = (0..50).collect();
        let expected: Vec<u64> = items.iter().map(|x| x * x + 1).collect();
        for jobs in [0, 1, 2, 7] {
            assert_eq!(map(&items, jobs, |x| x * x + 1), expected);
        }
    }

    #[test]
    fn sink_sees_every_result_once() {
        let items: Vec<usize> = (0..20).collect();
        for jobs in [1, 4] {
            let mut seen = vec![0; items.len()];
            let out = map_with_sink(&items, jobs, |x| x * 3, |i, r| {
                assert_eq!(*r, i * 3);
                seen[i] += 1;
            });
            assert!(seen.iter().all(|&c| c == 1));
            assert_eq!(out.len(), items.len());
        }
    }

    #[test]
    fn empty_input() {
        let items: Vec<u8> = Vec::new();
        assert!(map(&items, 4, |x| *x).is_empty());
    }
}
