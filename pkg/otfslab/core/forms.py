from fractions import Fraction

from django import forms

from otfslab.core.errors import ConfigurationError


class Form(forms.Form):
    """A config-file section validated like a web form.

    Takes the raw string mapping of one INI section. Keys the form doesn't
    declare are rejected rather than silently ignored."""

    section = None

    def __init__(self, data=None, *args, **kwargs):
        if 'label_suffix' not in kwargs:
            kwargs['label_suffix'] = ''
        self.unknown_keys = sorted(set(data or {}) - set(self.base_fields)) if data is not None else []
        super(Form, self).__init__(data, *args, **kwargs)

    def clean(self):
        cleaned_data = super(Form, self).clean()
        for key in self.unknown_keys:
            self.add_error(None, "Unknown key '%s'" % key)
        return cleaned_data

    def cleaned_or_raise(self):
        if not self.is_valid():
            problems = []
            for field, errors in self.errors.items():
                label = self.section if field == '__all__' else '%s.%s' % (self.section, field)
                problems.extend('%s: %s' % (label, e) for e in errors)
            raise ConfigurationError('; '.join(problems))
        # Only keys the section actually set; everything else keeps its default
        given = set(self.data or {})
        return dict((k, v) for k, v in self.cleaned_data.items() if k in given and v not in (None, ''))


class FloatListField(forms.CharField):
    """Comma-separated floats; fractions such as 3/4 are accepted."""

    def to_python(self, value):
        value = super(FloatListField, self).to_python(value)
        if not value:
            return []
        try:
            return [float(Fraction(v.strip())) for v in value.split(',') if v.strip()]
        except (ValueError, ZeroDivisionError):
            raise forms.ValidationError("Expected a comma-separated list of numbers")


class ChoiceListField(forms.CharField):

    def __init__(self, choices, *args, **kwargs):
        self.allowed = list(choices)
        super(ChoiceListField, self).__init__(*args, **kwargs)

    def to_python(self, value):
        value = super(ChoiceListField, self).to_python(value)
        if not value:
            return []
        items = [v.strip() for v in value.split(',') if v.strip()]
        bad = [v for v in items if v not in self.allowed]
        if bad:
            raise forms.ValidationError("Unknown choice(s): %s" % ', '.join(bad))
        return items
