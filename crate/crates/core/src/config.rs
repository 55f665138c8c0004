/// Blow-up guards for the abstraction and reachability procedures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of cubes abstract-VASR may process.
    pub cube_cap: usize,
    /// Maximum number of reset shapes in a reachability encoding.
    pub shape_cap: usize,
    /// Maximum number of control states before falling back to `{true}`.
    pub predicate_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            cube_cap: 200,
            shape_cap: 5000,
            predicate_cap: 16,
        }
    }
}
