from decimal import Decimal, ROUND_HALF_EVEN


def round_half_even(value):
    return Decimal(value).quantize(Decimal("1"), rounding=ROUND_HALF_EVEN)


def to_cents(amount):
    return int(round_half_even(Decimal(str(amount)) * 100))


def from_cents(cents):
    return Decimal(cents) / 100


def format_price(cents, currency="EUR"):
    value = from_cents(cents)
    return "{} {:.2f}".format(currency, value)


def percent_of(cents, percent):
    return int(round_half_even(Decimal(cents) * Decimal(percent) / 100))


def sum_cents(values):
    total = 0
    for v in values:
        total += to_cents(from_cents(v))
    return total
