from .models import DefectSet, Query, QueryPlan, ResponseVector, UniverseMismatchError
from .sampling import (
    evaluate,
    evaluate_plan,
    intersection_size,
    p_query_indices,
    random_p_plan,
    random_p_query,
    random_size_plan,
    singleton_plan,
    uniform_defect_set,
    uniform_subset_indices,
)
from .plan_io import format_defects, format_plan, parse_defects, parse_plan, read_defects, read_plan, write_defects, write_plan
