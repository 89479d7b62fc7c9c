/// The most recent `omega` observation rows of one user, newest first.
///
/// Flattened row-major: the `n` channels of one slot are contiguous, and
/// slot 0 is the newest. This flat vector is the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStack {
    n: usize,
    omega: usize,
    data: Vec<f64>,
}

impl ObservationStack {
    /// An all-zero window.
    pub fn new(n: usize, omega: usize) -> Self {
        Self {
            n,
            omega,
            data: vec![0.0; n * omega],
        }
    }

    pub fn num_channels(&self) -> usize {
        self.n
    }

    pub fn omega(&self) -> usize {
        self.omega
    }

    /// Drops the oldest row and inserts `row` as the newest.
    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n, "observation row length");
        let len = self.data.len();
        self.data.copy_within(0..len - self.n, self.n);
        self.data[..self.n].copy_from_slice(row);
    }

    /// Row `j` counted from the newest (`j = 0`).
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }
}
