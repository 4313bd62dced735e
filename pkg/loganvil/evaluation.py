""" Expert questionnaire ingestion and aggregate tables """
import csv
import json
import logging
import os
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from loganvil.core import QUESTION_IDS, Choice, QuestionnaireResponse, question_number
from loganvil.errors import KindMismatch, MissingModel, SchemaError

logger = logging.getLogger('loganvil')

CHOICE = 'choice'
RATING = 'rating'
DATASET_QUESTIONS = tuple(f'Q{i}' for i in range(1, 9))
MODEL_CHOICE_QUESTIONS = ('Q10', 'Q11', 'Q12', 'Q14', 'Q15', 'Q16')
MODEL_RATING_QUESTIONS = ('Q9', 'Q13')
NOT_AVAILABLE = 'n/a'


@dataclass(frozen=True)
class Questionnaire:
    question_ids: Tuple[str, ...]
    question_kind: Mapping[str, str]
    per_model: Mapping[str, bool]

    def __post_init__(self):
        for question_id in self.question_ids:
            expected_kind = RATING if question_id in MODEL_RATING_QUESTIONS else CHOICE
            if self.question_kind.get(question_id) != expected_kind:
                raise ValueError(f'{question_id} needs to be a {expected_kind} question')
            if self.per_model.get(question_id) != (question_number(question_id) >= 9):
                raise ValueError(f'{question_id} has the wrong per-model setting')

    def kind(self, question_id: str) -> str:
        if question_id not in self.question_kind:
            raise KeyError(f'unknown question {question_id}')
        return self.question_kind[question_id]


STANDARD_QUESTIONNAIRE = Questionnaire(
    question_ids=QUESTION_IDS,
    question_kind={q: RATING if q in MODEL_RATING_QUESTIONS else CHOICE for q in QUESTION_IDS},
    per_model={q: question_number(q) >= 9 for q in QUESTION_IDS},
)


@dataclass(frozen=True)
class ChoiceAggregate:
    yes_pct: float
    somewhat_pct: float
    no_pct: float
    n: int


@dataclass(frozen=True)
class RatingAggregate:
    mean: float
    n: int

    def __post_init__(self):
        if not 1.0 <= self.mean <= 5.0:
            raise ValueError('mean rating needs to be within 1..5')


def round_half_up(numerator: int, denominator: int, places: int) -> float:
    exponent = Decimal(1).scaleb(-places)
    return float((Decimal(numerator) / Decimal(denominator)).quantize(exponent, rounding=ROUND_HALF_UP))


def _parse_response(raw: dict, questionnaire: Questionnaire) -> QuestionnaireResponse:
    if not isinstance(raw, dict) or not isinstance(raw.get('expert_id'), str) or not raw['expert_id']:
        raise SchemaError('?', 'expert_id', 'every response needs a non-empty expert_id')
    expert_id = raw['expert_id']
    unknown = set(raw) - {'expert_id', 'choice_answers', 'rating_answers'}
    if unknown:
        raise SchemaError(expert_id, sorted(unknown)[0], 'unknown field')
    choices = {}
    for question_id, answer in (raw.get('choice_answers') or {}).items():
        if question_id not in questionnaire.question_ids or questionnaire.kind(question_id) != CHOICE:
            raise SchemaError(expert_id, question_id, 'not a choice question')
        per_model_answers = answer if questionnaire.per_model[question_id] else {None: answer}
        if not isinstance(per_model_answers, dict):
            raise SchemaError(expert_id, question_id, 'needs an object of model name -> answer')
        for model_name, value in per_model_answers.items():
            try:
                choices[(question_id, model_name)] = Choice(value)
            except ValueError as error:
                raise SchemaError(expert_id, question_id, f'{value!r} is not yes, somewhat or no') from error
    ratings = {}
    for question_id, answer in (raw.get('rating_answers') or {}).items():
        if question_id not in questionnaire.question_ids or questionnaire.kind(question_id) != RATING:
            raise SchemaError(expert_id, question_id, 'not a rating question')
        if not isinstance(answer, dict):
            raise SchemaError(expert_id, question_id, 'needs an object of model name -> rating')
        for model_name, score in answer.items():
            if isinstance(score, bool) or not isinstance(score, int) or not 1 <= score <= 5:
                raise SchemaError(expert_id, question_id, f'rating {score!r} is not an integer within 1..5')
            ratings[(question_id, model_name)] = score
    return QuestionnaireResponse(expert_id=expert_id, choice_answers=choices, rating_answers=ratings)


def load_responses(path: str, questionnaire: Questionnaire = STANDARD_QUESTIONNAIRE) -> List[QuestionnaireResponse]:
    """
    Responses file: JSON array of
    {"expert_id": "E1", "choice_answers": {"Q1": "yes", "Q10": {"gemma-4b": "somewhat"}},
     "rating_answers": {"Q9": {"gemma-4b": 4}}}
    """
    with open(path, encoding='utf-8') as file:
        try:
            raw_responses = json.load(file)
        except json.JSONDecodeError as error:
            raise SchemaError('?', 'file', f'{path} is not valid JSON: {error}') from error
    if not isinstance(raw_responses, list):
        raise SchemaError('?', 'file', f'{path} needs to hold a JSON array')
    responses = [_parse_response(raw, questionnaire) for raw in raw_responses]
    logger.debug(f'Loaded {len(responses)} questionnaire responses from {path}')
    return responses


def _check_question(question_id: str, model_name: Optional[str], kind: str, questionnaire: Questionnaire):
    if questionnaire.kind(question_id) != kind:
        raise KindMismatch(f'{question_id} is not a {kind} question')
    if questionnaire.per_model[question_id] and model_name is None:
        raise MissingModel(f'{question_id} is answered per model, model name missing')
    if not questionnaire.per_model[question_id] and model_name is not None:
        raise KindMismatch(f'{question_id} is about the dataset, not a model')


def aggregate_choice(responses: Sequence[QuestionnaireResponse], question_id: str, model_name: Optional[str] = None,
                     questionnaire: Questionnaire = STANDARD_QUESTIONNAIRE) -> Optional[ChoiceAggregate]:
    """ Yes/somewhat/no percentages rounded half up to one decimal, None when nobody answered """
    _check_question(question_id, model_name, CHOICE, questionnaire)
    answers = [r.choice_answers[(question_id, model_name)] for r in responses
               if (question_id, model_name) in r.choice_answers]
    if not answers:
        return None
    n = len(answers)
    return ChoiceAggregate(yes_pct=round_half_up(answers.count(Choice.YES) * 100, n, 1),
                           somewhat_pct=round_half_up(answers.count(Choice.SOMEWHAT) * 100, n, 1),
                           no_pct=round_half_up(answers.count(Choice.NO) * 100, n, 1),
                           n=n)


def aggregate_rating(responses: Sequence[QuestionnaireResponse], question_id: str, model_name: str,
                     questionnaire: Questionnaire = STANDARD_QUESTIONNAIRE) -> Optional[RatingAggregate]:
    """ Mean 1-5 rating rounded half up to two decimals, None when nobody answered """
    _check_question(question_id, model_name, RATING, questionnaire)
    scores = [r.rating_answers[(question_id, model_name)] for r in responses
              if (question_id, model_name) in r.rating_answers]
    if not scores:
        return None
    return RatingAggregate(mean=round_half_up(sum(scores), len(scores), 2), n=len(scores))


def format_percentage(value: Optional[float]) -> str:
    if value is None:
        return NOT_AVAILABLE
    return str(int(value)) if value == int(value) else f'{value:.1f}'


def _choice_cells(aggregate: Optional[ChoiceAggregate]) -> List[str]:
    if aggregate is None:
        return [NOT_AVAILABLE] * 3
    return [format_percentage(v) for v in (aggregate.yes_pct, aggregate.somewhat_pct, aggregate.no_pct)]


def build_tables(responses: Sequence[QuestionnaireResponse],
                 models: Sequence[str]) -> Dict[str, List[List[str]]]:
    """ Rows (header rows first) of the dataset, per-model choice and per-model rating tables """
    dataset = [['Question', 'Yes (%)', 'Somewhat (%)', 'No (%)']]
    for question_id in DATASET_QUESTIONS:
        dataset.append([question_id] + _choice_cells(aggregate_choice(responses, question_id)))

    model_header = ['']
    answer_header = ['Question']
    for model in models:
        model_header += [model, '', '']
        answer_header += ['Yes(%)', 'Some(%)', 'No(%)']
    model_choice = [model_header, answer_header]
    for question_id in MODEL_CHOICE_QUESTIONS:
        row = [question_id]
        for model in models:
            row += _choice_cells(aggregate_choice(responses, question_id, model))
        model_choice.append(row)

    model_rating = [['Question'] + list(models)]
    for question_id in MODEL_RATING_QUESTIONS:
        row = [question_id]
        for model in models:
            aggregate = aggregate_rating(responses, question_id, model)
            row.append(NOT_AVAILABLE if aggregate is None else f'{aggregate.mean:.2f}')
        model_rating.append(row)
    return {'dataset': dataset, 'model_choice': model_choice, 'model_rating': model_rating}


TABLE_TITLES = {
    'dataset': 'Expert evaluation of the generated dataset',
    'model_choice': 'Fine-tuned models, yes/somewhat/no questions',
    'model_rating': 'Fine-tuned models, 1-5 rating questions',
}


def _render_table(rows: List[List[str]]) -> List[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return [' | '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]


def render_report(responses: Sequence[QuestionnaireResponse], models: Sequence[str]) -> str:
    lines = []
    for name, rows in build_tables(responses, models).items():
        lines.append(TABLE_TITLES[name])
        lines.extend(_render_table(rows))
        lines.append('')
    return '\n'.join(lines)


def write_csv_tables(responses: Sequence[QuestionnaireResponse], models: Sequence[str], directory: str) -> List[str]:
    """ One CSV file per table """
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, rows in build_tables(responses, models).items():
        path = os.path.join(directory, f'{name}.csv')
        with open(path, 'w', encoding='utf-8', newline='') as file:
            csv.writer(file).writerows(rows)
        paths.append(path)
    logger.info(f'Wrote {len(paths)} evaluation tables to {directory}')
    return paths
