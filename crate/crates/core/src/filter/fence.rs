/// First key of every data page of a run.
///
/// With the fences in memory a lookup touches at most one page of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FencePointers {
    page_first_keys: Vec<Box<[u8]>>,
}

impl FencePointers {
    /// Builds fences for sorted `keys` packed `entries_per_page` to a page.
    pub fn build<'a, I>(keys: I, entries_per_page: usize) -> Self
    where
        I: IntoIterator<Item = &'a [u8]>,
    {
        assert!(entries_per_page > 0);
        let page_first_keys = keys
            .into_iter()
            .step_by(entries_per_page)
            .map(Box::from)
            .collect();
        FencePointers { page_first_keys }
    }

    pub fn from_keys(page_first_keys: Vec<Box<[u8]>>) -> Self {
        debug_assert!(page_first_keys.windows(2).all(|w| w[0] < w[1]));
        FencePointers { page_first_keys }
    }

    /// The only page whose key range may hold `key`, or `None` when `key`
    /// sorts before the first page.
    pub fn locate_page(&self, key: &[u8]) -> Option<usize> {
        let after = self.page_first_keys.partition_point(|first| &**first <= key);
        after.checked_sub(1)
    }

    pub fn page_count(&self) -> usize {
        self.page_first_keys.len()
    }

    pub fn keys(&self) -> impl ExactSizeIterator<Item = &[u8]> {
        self.page_first_keys.iter().map(|k| &**k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fences(firsts: &[u8]) -> FencePointers {
        FencePointers::from_keys(firsts.iter().map(|b| Box::from(&[*b][..])).collect())
    }

    #[test]
    fn exact_first_key_hits_its_page() {
        let f = fences(&[10, 20, 30]);
        assert_eq!(f.locate_page(&[10]), Some(0));
        assert_eq!(f.locate_page(&[20]), Some(1));
        assert_eq!(f.locate_page(&[30]), Some(2));
    }

    #[test]
    fn below_minimum_is_none() {
        let f = fences(&[10, 20, 30]);
        assert_eq!(f.locate_page(&[9]), None);
        assert_eq!(fences(&[]).locate_page(&[1]), None);
    }

    #[test]
    fn between_and_above() {
        let f = fences(&[10, 20, 30]);
        assert_eq!(f.locate_page(&[15]), Some(0));
        assert_eq!(f.locate_page(&[255]), Some(2));
    }

    #[test]
    fn build_takes_every_nth_key() {
        let keys: Vec<[u8; 1]> = (0u8..10).map(|i| [i * 2]).collect();
        let f = FencePointers::build(keys.iter().map(|k| &k[..]), 3);
        assert_eq!(f.page_count(), 4);
        assert_eq!(f.keys().map(|k| k[0]).collect::<Vec<_>>(), vec![0, 6, 12, 18]);
    }
}
