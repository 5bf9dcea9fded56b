def paginate(total, per_page=None, default_per_page=2000, max_per_page=100_000):
    """
    Split a replica count into consecutive batches

    Args:
        total: Number of replicas
        per_page: Replicas per batch
        default_per_page: Batch size if none provided
        max_per_page: Largest batch size allowed

    Returns:
        List of ``range`` objects covering 0..total-1 in order
    """
    if per_page is None:
        per_page = default_per_page

    # Ensure per_page is between 1 and max_per_page
    per_page = min(max(1, int(per_page)), max_per_page)
    total = max(0, int(total))

    pages = (total + per_page - 1) // per_page
    return [range(page * per_page, min(total, (page + 1) * per_page)) for page in range(pages)]
